#include "shroom/client.hpp"

#include <condition_variable>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace shroom {

MockClient::MockClient(std::vector<MockRule> rules, std::string fallback, AnnotatorOptions opts)
    : AnnotatorClient(opts), rules_(std::move(rules)), fallback_(std::move(fallback)) {}

MockClient MockClient::from_script_file(const std::filesystem::path& path, AnnotatorOptions opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open mock script " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    std::vector<MockRule> rules;
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
        MockRule rule;
        rule.contains = r.value("contains", std::string());
        rule.respond = r.value("respond", std::string());
        rule.fail = r.value("fail", false);
        rules.push_back(std::move(rule));
    }
    return MockClient(std::move(rules), doc.value("fallback", std::string()), opts);
}

std::string MockClient::complete(const std::string& prompt) {
    for (const MockRule& rule : rules_) {
        if (prompt.find(rule.contains) != std::string::npos) {
            if (rule.fail)
                throw ClientError("mock rule failure (contains \"" + rule.contains + "\")");
            return rule.respond;
        }
    }
    if (fallback_.empty())
        throw ClientError("mock client has no rule matching the prompt and no fallback");
    return fallback_;
}

// Counting gate bounding concurrent requests.
class InFlightGate {
public:
    explicit InFlightGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return active_ < limit_; });
        ++active_;
    }
    void release() {
        {
            std::lock_guard lk(mu_);
            --active_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int active_ = 0;
};

HttpAnnotatorClient::HttpAnnotatorClient(Endpoint endpoint, AnnotatorOptions opts)
    : AnnotatorClient(opts),
      endpoint_(std::move(endpoint)),
      next_allowed_start_(std::chrono::steady_clock::now()),
      gate_(std::make_unique<InFlightGate>(opts.max_in_flight)) {
    const std::string& url = endpoint_.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("endpoint must be an http(s) URL, got \"" + url + "\"");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = url;
    } else {
        origin_ = url.substr(0, path_start);
        path_prefix_ = url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

HttpAnnotatorClient::~HttpAnnotatorClient() = default;

std::string HttpAnnotatorClient::complete(const std::string& prompt) {
    // pace request starts, then bound concurrency
    {
        std::unique_lock lk(pacing_mu_);
        const auto now = std::chrono::steady_clock::now();
        if (next_allowed_start_ > now) {
            const auto wait = next_allowed_start_ - now;
            lk.unlock();
            std::this_thread::sleep_for(wait);
            lk.lock();
        }
        next_allowed_start_ = std::chrono::steady_clock::now() + opts_.min_delay;
    }
    gate_->acquire();
    struct Release {
        InFlightGate* g;
        ~Release() { g->release(); }
    } release{gate_.get()};

    httplib::Client cli(origin_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opts_.timeout);
    cli.set_connection_timeout(secs.count() > 0 ? secs.count() : 1, 0);
    cli.set_read_timeout(secs.count() > 0 ? secs.count() : 1, 0);
    cli.set_write_timeout(secs.count() > 0 ? secs.count() : 1, 0);

    httplib::Headers headers;
    if (!endpoint_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

    nlohmann::json body = {
        {"model", endpoint_.model},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
        {"temperature", 0},
    };

    auto res = cli.Post(path_prefix_ + "/chat/completions", headers, body.dump(),
                        "application/json");
    if (!res)
        throw ClientError("transport failure: " + httplib::to_string(res.error()));
    if (res->status == 401 || res->status == 403)
        throw FatalClientError("authentication rejected (HTTP " + std::to_string(res->status) + ")");
    if (res->status != 200)
        throw ClientError("HTTP " + std::to_string(res->status));

    try {
        nlohmann::json rep = nlohmann::json::parse(res->body);
        return rep.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ClientError(std::string("malformed completion response: ") + e.what());
    }
}

AuditLog::AuditLog(const std::filesystem::path& path) {
    std::error_code ec;
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path(), ec);
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_)
        throw IoError("cannot open audit log " + path.string());
}

void AuditLog::record(std::string_view sample_id, std::string_view prompt,
                      std::string_view completion, std::string_view outcome) {
    nlohmann::json rec = {
        {"id", std::string(sample_id)},
        {"prompt", std::string(prompt)},
        {"completion", std::string(completion)},
        {"outcome", std::string(outcome)},
    };
    std::lock_guard lk(mu_);
    out_ << rec.dump() << '\n';
    out_.flush();
}

}  // namespace shroom
