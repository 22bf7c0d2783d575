#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shroom/client.hpp"
#include "shroom/corpus.hpp"
#include "shroom/errors.hpp"

namespace shroom {

enum class RejectReason { UnparsableCompletion, ClientFailure, DegenerateRephrase };

const char* to_string(RejectReason r);

struct Rejection {
    std::string id;
    RejectReason reason = RejectReason::UnparsableCompletion;
    std::string detail;
};

struct AugmentationReport {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::vector<Rejection> rejected_ids;
};

nlohmann::json report_to_json(const AugmentationReport& r);

// Few-shot labeling prompt: instruction, >= 1 gold exemplars, one query.
struct FewShotPrompt {
    std::string instruction;
    std::vector<std::pair<Sample, Label>> exemplars;
    Sample query;

    // InvariantError if there are no exemplars or any is not Gold/labelled.
    void validate() const;
    std::string render() const;
};

// Seeded draw of up to `shots` exemplars from a gold pool, balanced between
// the classes as far as the pool allows.
std::vector<std::pair<Sample, Label>> draw_exemplars(const std::vector<Sample>& gold_pool,
                                                     std::uint64_t seed, int shots = 4);

// Scans a completion for the label. The negative pattern ("not
// hallucination", hyphen/whitespace tolerated) is checked before the
// positive standalone "hallucination" token. nullopt means unparsable.
std::optional<Label> parse_label_completion(std::string_view completion);

// Few-shot pseudo-labeling of an unlabelled dataset. Accepted samples keep
// src/hyp/tgt untouched and get tier PseudoLabelled with a hard p_hal of
// 1.0/0.0; failures after max_retries are rejected, not fatal. Output order
// follows input order.
std::pair<Dataset, AugmentationReport> pseudo_label(const Dataset& unlabelled,
                                                    AnnotatorClient& client,
                                                    const std::vector<Sample>& exemplars,
                                                    std::uint64_t seed,
                                                    AuditLog* audit = nullptr);

// Rephrases hyp and tgt of each gold sample in two separate calls; label and
// p_hal are conserved exactly. Empty or verbatim-identical rephrasings are
// rejected as DegenerateRephrase.
std::pair<Dataset, AugmentationReport> rephrase(const Dataset& gold, AnnotatorClient& client,
                                                std::uint64_t seed, AuditLog* audit = nullptr);

}  // namespace shroom
