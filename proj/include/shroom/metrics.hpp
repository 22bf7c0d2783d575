#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "shroom/corpus.hpp"
#include "shroom/errors.hpp"

namespace shroom {

// Positive class is Hallucination throughout.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

// Zero-denominator metrics are reported as 0 with the matching defined-flag
// cleared, so multi-run aggregates stay total.
struct MetricsReport {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double accuracy = 0.0;
    bool f1_defined = true;
    bool precision_defined = true;
    bool recall_defined = true;
    bool accuracy_defined = true;
    std::size_t n = 0;
    double threshold = 0.5;
};

struct MetricStat {
    double mean = 0.0;
    double std_dev = 0.0;  // sample std (n-1), 0 when n = 1
};

struct RunAggregate {
    MetricStat f1;
    MetricStat precision;
    MetricStat recall;
    MetricStat accuracy;
    std::size_t runs = 0;
    double threshold = 0.5;
};

// Hallucination iff p >= threshold. DomainError outside [0, 1].
Label binarize(double p, double threshold);

// LengthMismatch when sizes differ; SchemaError if a gold sample lacks a label.
ConfusionCounts confusion(const std::vector<double>& predictions, const Dataset& gold,
                          double threshold);

MetricsReport report_from_counts(const ConfusionCounts& c, double threshold);

// F1/precision/recall on the Hallucination class plus overall accuracy.
MetricsReport score(const std::vector<double>& predictions, const Dataset& gold,
                    double threshold = 0.5);

// Per-metric mean and sample standard deviation over runs.
// EmptyInput on no reports, MixedThreshold if thresholds differ.
RunAggregate aggregate_runs(const std::vector<MetricsReport>& reports);

struct MetricsTableRow {
    std::string model;
    std::string method;
    RunAggregate aggregate;
};

// Plain-text table: model, method, F1 +/- std, precision +/- std, recall +/- std,
// accuracy +/- std.
std::string render_metrics_table(const std::vector<MetricsTableRow>& rows);

nlohmann::json metrics_to_json(const MetricsReport& r);
nlohmann::json aggregate_to_json(const RunAggregate& a);

}  // namespace shroom
