#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shroom/corpus.hpp"
#include "shroom/errors.hpp"

namespace shroom {

// How a sample becomes a (premise, hypothesis) pair for the encoder.
// Default: premise is tgt, falling back to src when tgt is blank; the
// generated hyp is always the hypothesis side.
enum class PairingRule { TargetElseSource, SourceAlways };

const char* to_string(PairingRule r);
PairingRule pairing_from_string(const std::string& s);  // ConfigError

class EncoderBackend {
public:
    virtual ~EncoderBackend() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dim() const = 0;
    // Fixed-dimension pair embedding; throws EncodeError on failure.
    virtual std::vector<double> encode(std::string_view premise, std::string_view hypothesis) const = 0;
};

// Reference backend: hashed character n-gram counts (n = 2, 3) of premise
// and hypothesis, L2-normalized per side, concatenated with their
// elementwise product and absolute difference. Deterministic, no trainable
// parameters, no model downloads; only the head trains on top of it.
class HashedNgramEncoder final : public EncoderBackend {
public:
    static constexpr std::size_t kDefaultDim = 2048;

    explicit HashedNgramEncoder(std::size_t dim = kDefaultDim);

    std::string id() const override { return "hashed-ngram-v1"; }
    std::size_t dim() const override { return dim_; }
    std::vector<double> encode(std::string_view premise, std::string_view hypothesis) const override;

    // one side's normalized n-gram profile, dim()/4 wide
    std::vector<double> text_profile(std::string_view text) const;

private:
    std::size_t dim_;
};

// Adapter for a pre-trained pair encoder whose vectors were produced
// offline: a record array of {"premise", "hypothesis", "vec"} loaded from a
// local path. Unknown pairs raise EncodeError.
class EmbeddingFileBackend final : public EncoderBackend {
public:
    explicit EmbeddingFileBackend(const std::filesystem::path& path);

    std::string id() const override { return "external-embedding-v1"; }
    std::size_t dim() const override { return dim_; }
    std::vector<double> encode(std::string_view premise, std::string_view hypothesis) const override;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::vector<double>> table_;
};

struct HeadParams {
    std::vector<double> w;
    double b = 0.0;

    bool operator==(const HeadParams&) const = default;
};

// Per-tier loss weights. Defaults are the best-performing configuration.
struct LossWeights {
    double gold = 1.01;
    double rephrased = 0.4;
    double pseudo = 0.1;

    // TierError for Unlabelled
    double for_tier(QualityTier t) const;

    // populated unless gold > rephrased > pseudo; a warning, not an error
    std::optional<std::string> ordering_warning() const;

    bool operator==(const LossWeights&) const = default;
};

// Optional per-stage epoch overrides for sequential training.
struct StageEpochs {
    std::optional<int> pseudo;
    std::optional<int> rephrased;
    std::optional<int> gold;

    bool operator==(const StageEpochs&) const = default;
};

struct TrainConfig {
    double learning_rate = 0.5;
    int epochs = 20;  // per stage for sequential; 0 means no parameter updates
    int batch_size = 32;
    std::uint64_t seed = 0;
    LossWeights loss_weights;
    PairingRule pairing = PairingRule::TargetElseSource;
    StageEpochs stage_epochs;

    void validate() const;  // ConfigError
};

struct TraceEntry {
    std::string stage;
    int epoch = 0;
    double mean_loss = 0.0;
};

struct TrainingTrace {
    std::vector<TraceEntry> entries;
    std::vector<std::string> stages;  // execution order
};

// Text-pair classifier: frozen encoder backend plus a trainable affine head
// whose logit is clamped to [clamp_lo, clamp_hi] before the logistic, so
// outputs stay strictly inside (0, 1) and BCE stays finite.
class ClassifierModel {
public:
    ClassifierModel(std::shared_ptr<const EncoderBackend> encoder,
                    PairingRule pairing = PairingRule::TargetElseSource,
                    double clamp_lo = -15.0, double clamp_hi = 15.0);

    // p_hat(hal) for one sample; deterministic for fixed parameters
    double predict(const Sample& sample) const;
    double predict_features(std::span<const double> features) const;

    std::pair<std::string_view, std::string_view> pair_texts(const Sample& sample) const;
    std::vector<double> features(const Sample& sample) const;

    const EncoderBackend& encoder() const { return *encoder_; }
    std::shared_ptr<const EncoderBackend> encoder_ptr() const { return encoder_; }
    const HeadParams& head() const { return head_; }
    HeadParams& head() { return head_; }
    void set_head(HeadParams h);

    PairingRule pairing() const { return pairing_; }
    void set_pairing(PairingRule r) { pairing_ = r; }
    double clamp_lo() const { return clamp_lo_; }
    double clamp_hi() const { return clamp_hi_; }

private:
    std::shared_ptr<const EncoderBackend> encoder_;
    HeadParams head_;
    PairingRule pairing_;
    double clamp_lo_;
    double clamp_hi_;
};

// Binary cross entropy with soft targets: -(y log f + (1-y) log(1-f)).
// DomainError if y is outside [0, 1] or f is not strictly inside (0, 1).
double bce(double y, double f);

// Tier weight times bce. TierError for Unlabelled samples.
double weighted_bce(QualityTier tier, const LossWeights& weights, double y, double f);

// Training strategies. Each updates the model in place by seeded mini-batch
// gradient descent on the head and returns the trace.

// Gold data only, soft targets y = p_hal. Trace stage "baseline".
TrainingTrace train_baseline(ClassifierModel& model, const Dataset& d_g, const TrainConfig& cfg);

// One phase over the shuffled union of gold/rephrased/pseudo with tier
// weights; y = p_hal where present, else the binary label. Stage "crlft".
TrainingTrace train_crlft(ClassifierModel& model, const Dataset& d_g, const Dataset& d_r,
                          const Dataset& d_pl, const TrainConfig& cfg);

// Three phases strictly in order pseudo -> rephrased -> gold, each
// continuing from the previous parameters. Stages "seq/pseudo",
// "seq/rephrased", "seq/gold".
TrainingTrace train_sequential(ClassifierModel& model, const Dataset& d_pl, const Dataset& d_r,
                               const Dataset& d_g, const TrainConfig& cfg);

namespace detail {

struct TrainItem {
    double target = 0.0;
    double weight = 1.0;
    std::vector<double> features;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

// Mean weighted BCE and its analytic gradient over the indexed batch.
// Samples whose clamped logit sits outside (clamp_lo, clamp_hi) contribute
// zero gradient, matching the derivative of the clamped loss.
LossGrad head_loss_grad(const std::vector<TrainItem>& items, std::span<const std::size_t> batch,
                        const HeadParams& head, double clamp_lo, double clamp_hi);

// y = p_hal where present, else label as 0/1; SchemaError if neither exists.
double training_target(const Sample& s);

// Require every sample of `d` to be of tier `t`.
void check_tier(const Dataset& d, QualityTier t, const char* op);

std::vector<TrainItem> make_items(const ClassifierModel& model, const Dataset& d, double weight);

// One seeded pass-sequence over the items; records the stage tag and one
// trace entry per epoch. The RNG is seeded afresh from cfg.seed per phase.
void run_phase(ClassifierModel& model, std::vector<TrainItem>& items, const TrainConfig& cfg,
               int epochs, const std::string& stage, TrainingTrace& trace);

}  // namespace detail

}  // namespace shroom
