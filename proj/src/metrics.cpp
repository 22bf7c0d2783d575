#include "shroom/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace shroom {

namespace {

void check_unit_interval(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
        std::ostringstream os;
        os << name << " must lie in [0, 1], got " << v;
        throw DomainError(os.str());
    }
}

std::string pm(const MetricStat& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f±%.4f", s.mean, s.std_dev);
    return buf;
}

MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    const double n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.std_dev = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

}  // namespace

Label binarize(double p, double threshold) {
    check_unit_interval(p, "probability");
    check_unit_interval(threshold, "threshold");
    return p >= threshold ? Label::Hallucination : Label::NotHallucination;
}

ConfusionCounts confusion(const std::vector<double>& predictions, const Dataset& gold,
                          double threshold) {
    if (predictions.size() != gold.size())
        throw LengthMismatch("got " + std::to_string(predictions.size()) + " predictions for " +
                             std::to_string(gold.size()) + " gold samples");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const Sample& s = gold.samples[i];
        if (!s.label)
            throw SchemaError("gold sample " + s.id + " has no label");
        const bool pred_hal = binarize(predictions[i], threshold) == Label::Hallucination;
        const bool gold_hal = *s.label == Label::Hallucination;
        if (pred_hal && gold_hal)
            ++c.tp;
        else if (pred_hal && !gold_hal)
            ++c.fp;
        else if (!pred_hal && gold_hal)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

MetricsReport report_from_counts(const ConfusionCounts& c, double threshold) {
    MetricsReport r;
    r.n = c.total();
    r.threshold = threshold;

    if (c.tp + c.fp > 0)
        r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    else
        r.precision_defined = false;

    if (c.tp + c.fn > 0)
        r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    else
        r.recall_defined = false;

    if (r.precision_defined && r.recall_defined && r.precision + r.recall > 0.0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    else
        r.f1_defined = false;

    if (r.n > 0)
        r.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(r.n);
    else
        r.accuracy_defined = false;

    return r;
}

MetricsReport score(const std::vector<double>& predictions, const Dataset& gold,
                    double threshold) {
    return report_from_counts(confusion(predictions, gold, threshold), threshold);
}

RunAggregate aggregate_runs(const std::vector<MetricsReport>& reports) {
    if (reports.empty())
        throw EmptyInput("aggregate_runs needs at least one report");
    for (const auto& r : reports) {
        if (r.threshold != reports.front().threshold)
            throw MixedThreshold("reports were scored at different thresholds");
    }

    std::vector<double> f1, pr, rc, acc;
    for (const auto& r : reports) {
        f1.push_back(r.f1);
        pr.push_back(r.precision);
        rc.push_back(r.recall);
        acc.push_back(r.accuracy);
    }
    RunAggregate a;
    a.f1 = stat_of(f1);
    a.precision = stat_of(pr);
    a.recall = stat_of(rc);
    a.accuracy = stat_of(acc);
    a.runs = reports.size();
    a.threshold = reports.front().threshold;
    return a;
}

std::string render_metrics_table(const std::vector<MetricsTableRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Model", "Method", "F1 score", "Precision", "Recall", "Accuracy"});
    for (const auto& row : rows) {
        cells.push_back({row.model, row.method, pm(row.aggregate.f1), pm(row.aggregate.precision),
                         pm(row.aggregate.recall), pm(row.aggregate.accuracy)});
    }

    // column widths in display characters; the +/- sign is 2 UTF-8 bytes wide 1
    auto width = [](const std::string& s) {
        std::size_t w = 0;
        for (unsigned char ch : s)
            if ((ch & 0xC0) != 0x80) ++w;
        return w;
    };
    std::vector<std::size_t> col(cells[0].size(), 0);
    for (const auto& row : cells)
        for (std::size_t j = 0; j < row.size(); ++j) col[j] = std::max(col[j], width(row[j]));

    std::ostringstream os;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t j = 0; j < cells[i].size(); ++j) {
            os << cells[i][j];
            if (j + 1 < cells[i].size())
                os << std::string(col[j] - width(cells[i][j]) + 2, ' ');
        }
        os << '\n';
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t j = 0; j < col.size(); ++j) total += col[j] + (j + 1 < col.size() ? 2 : 0);
            os << std::string(total, '-') << '\n';
        }
    }
    return os.str();
}

nlohmann::json metrics_to_json(const MetricsReport& r) {
    return {
        {"f1", r.f1},
        {"precision", r.precision},
        {"recall", r.recall},
        {"accuracy", r.accuracy},
        {"f1_defined", r.f1_defined},
        {"precision_defined", r.precision_defined},
        {"recall_defined", r.recall_defined},
        {"accuracy_defined", r.accuracy_defined},
        {"n", r.n},
        {"threshold", r.threshold},
    };
}

nlohmann::json aggregate_to_json(const RunAggregate& a) {
    auto stat = [](const MetricStat& s) {
        return nlohmann::json{{"mean", s.mean}, {"std", s.std_dev}};
    };
    return {
        {"f1", stat(a.f1)},         {"precision", stat(a.precision)},
        {"recall", stat(a.recall)}, {"accuracy", stat(a.accuracy)},
        {"runs", a.runs},           {"threshold", a.threshold},
    };
}

}  // namespace shroom
