#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "shroom/errors.hpp"

namespace shroom {

struct AnnotatorOptions {
    int max_retries = 2;  // extra attempts after the first, per sample
    std::chrono::milliseconds timeout{30000};
    int max_in_flight = 1;               // concurrent calls the caller may issue
    std::chrono::milliseconds min_delay{0};  // minimum spacing between request starts

    bool operator==(const AnnotatorOptions&) const = default;
};

// Text-completion endpoint used for pseudo-labeling and rephrasing.
// complete() is nondeterministic and fallible from the caller's point of
// view: ClientError is retryable, FatalClientError aborts the run.
class AnnotatorClient {
public:
    explicit AnnotatorClient(AnnotatorOptions opts = {}) : opts_(opts) {}
    virtual ~AnnotatorClient() = default;

    virtual std::string complete(const std::string& prompt) = 0;

    const AnnotatorOptions& options() const { return opts_; }

protected:
    AnnotatorOptions opts_;
};

// Test client backed by an arbitrary function; the function may throw
// ClientError/FatalClientError to script failures. Must be thread-safe if
// used with max_in_flight > 1.
class CallbackClient final : public AnnotatorClient {
public:
    using Fn = std::function<std::string(const std::string&)>;
    explicit CallbackClient(Fn fn, AnnotatorOptions opts = {})
        : AnnotatorClient(opts), fn_(std::move(fn)) {}

    std::string complete(const std::string& prompt) override { return fn_(prompt); }

private:
    Fn fn_;
};

// Deterministic lookup-table client: the first rule whose `contains` string
// occurs in the prompt wins; a rule with fail=true throws ClientError.
// With no match, the fallback answers; an empty fallback throws ClientError.
struct MockRule {
    std::string contains;
    std::string respond;
    bool fail = false;
};

class MockClient final : public AnnotatorClient {
public:
    MockClient(std::vector<MockRule> rules, std::string fallback, AnnotatorOptions opts = {});

    // JSON script: {"rules": [{"contains": ..., "respond": ..., "fail": bool}],
    //               "fallback": "..."}
    static MockClient from_script_file(const std::filesystem::path& path,
                                       AnnotatorOptions opts = {});

    std::string complete(const std::string& prompt) override;

private:
    std::vector<MockRule> rules_;
    std::string fallback_;
};

// Chat-completion HTTP adapter (OpenAI-style /chat/completions). The API key
// comes from the environment, never from flags. Enforces max_in_flight and
// min_delay across threads.
class HttpAnnotatorClient final : public AnnotatorClient {
public:
    struct Endpoint {
        std::string base_url;  // e.g. "http://localhost:8080/v1"
        std::string model;
        std::string api_key;
    };

    HttpAnnotatorClient(Endpoint endpoint, AnnotatorOptions opts = {});
    ~HttpAnnotatorClient() override;

    std::string complete(const std::string& prompt) override;

private:
    Endpoint endpoint_;
    std::string origin_;       // scheme://host[:port]
    std::string path_prefix_;  // path part of base_url
    std::mutex pacing_mu_;
    std::chrono::steady_clock::time_point next_allowed_start_;
    std::unique_ptr<class InFlightGate> gate_;
};

// Append-only JSONL log of every annotator call: sample id, prompt,
// completion, outcome. Safe under concurrent appends.
class AuditLog {
public:
    explicit AuditLog(const std::filesystem::path& path);

    void record(std::string_view sample_id, std::string_view prompt, std::string_view completion,
                std::string_view outcome);

private:
    std::mutex mu_;
    std::ofstream out_;
};

}  // namespace shroom
