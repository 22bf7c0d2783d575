#include "shroom/augment.hpp"

#include <atomic>
#include <algorithm>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "shroom/rng.hpp"

namespace shroom {

namespace {

const char* kLabelInstruction =
    "Decide whether the hypothesis is a semantic hallucination with respect to the "
    "reference texts. Answer with exactly one label: Hallucination or Not Hallucination.";

std::string render_rephrase_prompt(const std::string& text) {
    return "Rephrase the following text, preserving its exact meaning while changing the "
           "wording. Reply with only the rephrased text.\n\nText: " +
           text;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    auto is_ws = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
    while (b < e && is_ws(s[b])) ++b;
    while (e > b && is_ws(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

// Index-parallel map with bounded workers; the first exception aborts the
// remaining work and is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> cancelled{false};
    std::mutex err_mu;
    std::exception_ptr first_error;

    auto body = [&] {
        while (!cancelled.load(std::memory_order_relaxed)) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                cancelled.store(true);
                break;
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    pool.reserve(k);
    for (std::size_t t = 0; t < k; ++t) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct SlotOutcome {
    std::optional<Sample> sample;
    std::optional<Rejection> rejection;
};

std::pair<Dataset, AugmentationReport> assemble(std::vector<SlotOutcome>&& slots, Split split) {
    Dataset out;
    out.split_tag = split;
    AugmentationReport report;
    for (auto& slot : slots) {
        if (slot.sample) {
            out.samples.push_back(std::move(*slot.sample));
            ++report.accepted;
        } else {
            report.rejected_ids.push_back(std::move(*slot.rejection));
            ++report.rejected;
        }
    }
    return {std::move(out), std::move(report)};
}

}  // namespace

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::UnparsableCompletion: return "UnparsableCompletion";
        case RejectReason::ClientFailure: return "ClientFailure";
        case RejectReason::DegenerateRephrase: return "DegenerateRephrase";
    }
    return "?";
}

nlohmann::json report_to_json(const AugmentationReport& r) {
    nlohmann::json rejected = nlohmann::json::array();
    for (const auto& rej : r.rejected_ids)
        rejected.push_back({{"id", rej.id}, {"reason", to_string(rej.reason)}, {"detail", rej.detail}});
    return {{"accepted", r.accepted}, {"rejected", r.rejected}, {"rejected_ids", rejected}};
}

void FewShotPrompt::validate() const {
    if (exemplars.empty())
        throw InvariantError("few-shot prompt needs at least one exemplar");
    for (const auto& [s, label] : exemplars) {
        if (s.tier != QualityTier::Gold)
            throw InvariantError("exemplar " + s.id + " is not gold tier");
        if (!s.label || *s.label != label)
            throw InvariantError("exemplar " + s.id + " label disagrees with its sample");
    }
}

std::string FewShotPrompt::render() const {
    validate();
    std::ostringstream os;
    os << instruction << "\n";
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        const auto& [s, label] = exemplars[i];
        os << "\nExample " << (i + 1) << "\nSource: " << s.src << "\nHypothesis: " << s.hyp
           << "\nReference: " << s.tgt << "\nLabel: " << to_string(label) << "\n";
    }
    os << "\nNow label this case.\nSource: " << query.src << "\nHypothesis: " << query.hyp
       << "\nReference: " << query.tgt << "\nLabel:";
    return os.str();
}

std::vector<std::pair<Sample, Label>> draw_exemplars(const std::vector<Sample>& gold_pool,
                                                     std::uint64_t seed, int shots) {
    if (gold_pool.empty())
        throw EmptyInput("exemplar pool is empty");
    if (shots < 1)
        throw ConfigError("shots must be >= 1");

    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < gold_pool.size(); ++i) {
        const Sample& s = gold_pool[i];
        if (s.tier != QualityTier::Gold)
            throw TierError("exemplar pool sample " + s.id + " is not gold tier");
        if (!s.label)
            throw SchemaError("exemplar pool sample " + s.id + " has no label");
        (*s.label == Label::Hallucination ? pos : neg).push_back(i);
    }

    SeededRng rng(seed);
    rng.shuffle(pos);
    rng.shuffle(neg);

    const std::size_t want = static_cast<std::size_t>(shots);
    std::size_t take_neg = std::min(neg.size(), want / 2);
    std::size_t take_pos = std::min(pos.size(), want - take_neg);
    take_neg = std::min(neg.size(), want - take_pos);

    std::vector<std::pair<Sample, Label>> out;
    out.reserve(take_pos + take_neg);
    for (std::size_t i = 0; i < std::max(take_pos, take_neg); ++i) {
        if (i < take_pos) out.emplace_back(gold_pool[pos[i]], Label::Hallucination);
        if (i < take_neg) out.emplace_back(gold_pool[neg[i]], Label::NotHallucination);
    }
    return out;
}

std::optional<Label> parse_label_completion(std::string_view completion) {
    static const std::regex negative(R"(\bnot[\s\-]*hallucination)", std::regex::icase);
    static const std::regex positive(R"(\bhallucination\b)", std::regex::icase);
    // negative first, so "not hallucination" never feeds the positive match
    if (std::regex_search(completion.begin(), completion.end(), negative))
        return Label::NotHallucination;
    if (std::regex_search(completion.begin(), completion.end(), positive))
        return Label::Hallucination;
    return std::nullopt;
}

std::pair<Dataset, AugmentationReport> pseudo_label(const Dataset& unlabelled,
                                                    AnnotatorClient& client,
                                                    const std::vector<Sample>& exemplars,
                                                    std::uint64_t seed, AuditLog* audit) {
    for (const Sample& s : unlabelled.samples)
        if (s.tier != QualityTier::Unlabelled)
            throw TierError("pseudo_label: sample " + s.id + " is not unlabelled");

    const auto shots = draw_exemplars(exemplars, seed);
    const int attempts = 1 + std::max(0, client.options().max_retries);

    std::vector<SlotOutcome> slots(unlabelled.size());
    parallel_for(unlabelled.size(), client.options().max_in_flight, [&](std::size_t i) {
        const Sample& src = unlabelled.samples[i];
        FewShotPrompt prompt{kLabelInstruction, shots, src};
        const std::string text = prompt.render();

        RejectReason last = RejectReason::ClientFailure;
        std::string detail;
        for (int a = 0; a < attempts; ++a) {
            std::string completion;
            try {
                completion = client.complete(text);
            } catch (const FatalClientError&) {
                throw;
            } catch (const ClientError& e) {
                last = RejectReason::ClientFailure;
                detail = e.what();
                if (audit) audit->record(src.id, text, "", "client-error");
                continue;
            }
            if (auto label = parse_label_completion(completion)) {
                Sample out = src;
                out.tier = QualityTier::PseudoLabelled;
                out.label = *label;
                out.p_hal = *label == Label::Hallucination ? 1.0 : 0.0;
                if (audit) audit->record(src.id, text, completion, "accepted");
                slots[i].sample = std::move(out);
                return;
            }
            last = RejectReason::UnparsableCompletion;
            detail = completion.substr(0, 120);
            if (audit) audit->record(src.id, text, completion, "unparsable");
        }
        slots[i].rejection = Rejection{src.id, last, detail};
    });

    return assemble(std::move(slots), unlabelled.split_tag);
}

std::pair<Dataset, AugmentationReport> rephrase(const Dataset& gold, AnnotatorClient& client,
                                                std::uint64_t seed, AuditLog* audit) {
    (void)seed;  // reserved for clients that sample; rephrasing itself draws nothing
    for (const Sample& s : gold.samples)
        if (s.tier != QualityTier::Gold)
            throw TierError("rephrase: sample " + s.id + " is not gold tier");

    const int attempts = 1 + std::max(0, client.options().max_retries);

    // one field's rephrasing, with the shared retry policy
    auto rephrase_text = [&](const Sample& s, const std::string& original,
                             RejectReason& reason, std::string& detail) -> std::optional<std::string> {
        const std::string prompt = render_rephrase_prompt(original);
        for (int a = 0; a < attempts; ++a) {
            std::string completion;
            try {
                completion = client.complete(prompt);
            } catch (const FatalClientError&) {
                throw;
            } catch (const ClientError& e) {
                reason = RejectReason::ClientFailure;
                detail = e.what();
                if (audit) audit->record(s.id, prompt, "", "client-error");
                continue;
            }
            std::string text = trim(completion);
            if (text.empty() || text == original) {
                reason = RejectReason::DegenerateRephrase;
                detail = text.empty() ? "empty completion" : "identical to input";
                if (audit) audit->record(s.id, prompt, completion, "degenerate");
                continue;
            }
            if (audit) audit->record(s.id, prompt, completion, "accepted");
            return text;
        }
        return std::nullopt;
    };

    std::vector<SlotOutcome> slots(gold.size());
    parallel_for(gold.size(), client.options().max_in_flight, [&](std::size_t i) {
        const Sample& src = gold.samples[i];
        RejectReason reason = RejectReason::DegenerateRephrase;
        std::string detail;

        auto new_hyp = rephrase_text(src, src.hyp, reason, detail);
        if (!new_hyp) {
            slots[i].rejection = Rejection{src.id, reason, detail};
            return;
        }
        auto new_tgt = rephrase_text(src, src.tgt, reason, detail);
        if (!new_tgt) {
            slots[i].rejection = Rejection{src.id, reason, detail};
            return;
        }

        Sample out = src;  // src, task, label, p_hal conserved exactly
        out.tier = QualityTier::Rephrased;
        out.hyp = std::move(*new_hyp);
        out.tgt = std::move(*new_tgt);
        slots[i].sample = std::move(out);
    });

    return assemble(std::move(slots), gold.split_tag);
}

}  // namespace shroom
