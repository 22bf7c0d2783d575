#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shroom/classifier.hpp"
#include "shroom/corpus.hpp"
#include "shroom/errors.hpp"

namespace shroom {

// One validation sample's probabilities from the three strategies, in the
// fixed component order (baseline, crlft, sequential).
struct PredictionTriple {
    std::string sample_id;
    double base = 0.5;
    double rlft = 0.5;
    double seq = 0.5;

    double component(std::size_t k) const { return k == 0 ? base : k == 1 ? rlft : seq; }
    bool operator==(const PredictionTriple&) const = default;
};

// Single-layer combiner: y = sigmoid(w . (base, rlft, seq) + b).
struct EnsembleParams {
    std::array<double, 3> w{0.0, 0.0, 0.0};
    double b = 0.0;

    bool operator==(const EnsembleParams&) const = default;
};

// Named presets usable without refitting. "paper" is the published
// full-scale configuration W = (0.52, 1.7, 1.82), b = -1.7.
EnsembleParams ensemble_preset(const std::string& name);  // ConfigError on unknown name

// sigmoid(w0*base + w1*rlft + w2*seq + b), evaluated in that fixed order.
double apply_ensemble(const EnsembleParams& params, const PredictionTriple& triple);

// Parameters that reproduce component k's decision: w = scale * e_k,
// b = -scale / 2. Feasibility bound for fit quality.
EnsembleParams selector_params(std::size_t component, double scale = 15.0);

// Mean BCE of the combiner on (triples, targets), computed from logits so it
// stays finite for any finite parameters.
double ensemble_bce(const EnsembleParams& params, const std::vector<PredictionTriple>& triples,
                    const std::vector<double>& targets);

struct EnsembleFitConfig {
    double learning_rate = 0.5;
    int max_iters = 5000;
    double tolerance = 1e-8;  // stop when the per-step loss improvement drops below this
    std::uint64_t seed = 0;
    enum class Init { Zeros, Random } init = Init::Zeros;
};

struct EnsembleFitResult {
    EnsembleParams params;
    double final_loss = 0.0;
    int iters = 0;
};

// Full-batch gradient descent on mean BCE; convex, so the result is
// effectively init-independent. Targets may be soft (p_hal) or binary.
EnsembleFitResult fit_ensemble(const std::vector<PredictionTriple>& triples,
                               const std::vector<double>& targets,
                               const EnsembleFitConfig& cfg);

// One triple per sample in dataset order from three frozen models.
// EncodeError is rethrown with the failing sample id.
std::vector<PredictionTriple> collect_triples(const ClassifierModel& base,
                                              const ClassifierModel& rlft,
                                              const ClassifierModel& seq, const Dataset& dataset);

// Record-array round trip for offline fitting.
void write_triples(const std::vector<PredictionTriple>& triples, const std::filesystem::path& path);
std::vector<PredictionTriple> load_triples(const std::filesystem::path& path);

namespace detail {

struct EnsembleGrad {
    double loss = 0.0;
    std::array<double, 3> grad_w{0.0, 0.0, 0.0};
    double grad_b = 0.0;
};

EnsembleGrad ensemble_loss_grad(const EnsembleParams& params,
                                const std::vector<PredictionTriple>& triples,
                                const std::vector<double>& targets);

}  // namespace detail

}  // namespace shroom
