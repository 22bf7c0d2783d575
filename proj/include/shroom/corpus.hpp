#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shroom/errors.hpp"

namespace shroom {

enum class Task { DM, MT, PG };

enum class Label { NotHallucination = 0, Hallucination = 1 };

// Label provenance, ordered by reliability: Gold > Rephrased > PseudoLabelled > Unlabelled.
enum class QualityTier { Unlabelled = 0, PseudoLabelled = 1, Rephrased = 2, Gold = 3 };

enum class Split { Train, Val, Test };

const char* to_string(Task t);
const char* to_string(Label l);  // shared-task spelling: "Hallucination" / "Not Hallucination"
const char* to_string(QualityTier t);
const char* to_string(Split s);

std::optional<Task> try_task_from_string(const std::string& s);
std::optional<Label> try_label_from_string(const std::string& s);
std::optional<QualityTier> try_tier_from_string(const std::string& s);
Task task_from_string(const std::string& s);          // SchemaError on unknown value
Label label_from_string(const std::string& s);        // SchemaError
QualityTier tier_from_string(const std::string& s);   // SchemaError

// One corpus record. `id` is assigned at ingestion and preserves record
// order; `extras` holds any input fields the schema does not recognize and
// is written back verbatim.
struct Sample {
    std::string id;
    std::string src;
    std::string hyp;
    std::string tgt;
    Task task = Task::DM;
    std::optional<Label> label;
    std::optional<double> p_hal;  // fraction of annotators voting Hallucination
    QualityTier tier = QualityTier::Unlabelled;
    nlohmann::json extras = nlohmann::json::object();

    bool operator==(const Sample&) const = default;
};

struct Dataset {
    std::vector<Sample> samples;
    Split split_tag = Split::Train;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    bool operator==(const Dataset&) const = default;
};

// Hallucination iff p_hal >= 0.5; the tie at exactly 0.5 goes to the
// positive class. Throws DomainError outside [0, 1].
Label derive_label(double p_hal);

// Enforces all per-sample invariants (p_hal range, tier/field agreement,
// label consistency with p_hal, extras not shadowing schema keys).
// `where` names the record in error messages.
void validate_sample(const Sample& s, const std::string& where);

// Reads a record-array file, applying `tier` uniformly. Fails loudly on any
// malformed record; never coerces.
Dataset load_dataset(const std::filesystem::path& path, QualityTier tier, Split split_tag);

// Writes the shared-task record format; load_dataset on the result
// reproduces every field, including extras.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace shroom
