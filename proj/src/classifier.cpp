#include "shroom/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "shroom/rng.hpp"

namespace shroom {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv_mix(std::uint64_t h, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        h ^= (v >> (i * 8)) & 0xFFu;
        h *= kFnvPrime;
    }
    return h;
}

// Decode the next UTF-8 codepoint; malformed bytes yield U+FFFD and advance
// by one so arbitrary byte strings never throw.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    const unsigned char b0 = byte(i);
    std::size_t len = 1;
    char32_t cp = 0xFFFD;
    if (b0 < 0x80) {
        cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1Fu;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0Fu;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07u;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + len > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (std::size_t k = 1; k < len; ++k) {
        if ((byte(i + k) & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (byte(i + k) & 0x3Fu);
    }
    i += len;
    return cp;
}

std::vector<char32_t> codepoints(std::string_view s) {
    std::vector<char32_t> cps;
    cps.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) cps.push_back(next_codepoint(s, i));
    return cps;
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

bool is_blank(std::string_view s) {
    for (char c : s)
        if (c != ' ' && c != '\t' && c != '\n' && c != '\r') return false;
    return true;
}

}  // namespace

const char* to_string(PairingRule r) {
    return r == PairingRule::TargetElseSource ? "tgt-else-src" : "src";
}

PairingRule pairing_from_string(const std::string& s) {
    if (s == "tgt-else-src") return PairingRule::TargetElseSource;
    if (s == "src") return PairingRule::SourceAlways;
    throw ConfigError("unknown pairing rule \"" + s + "\" (expected tgt-else-src or src)");
}

HashedNgramEncoder::HashedNgramEncoder(std::size_t dim) : dim_(dim) {
    if (dim_ == 0 || dim_ % 4 != 0)
        throw ConfigError("hashed-ngram dimension must be a positive multiple of 4");
}

std::vector<double> HashedNgramEncoder::text_profile(std::string_view text) const {
    const std::size_t block = dim_ / 4;
    std::vector<double> out(block, 0.0);
    const auto cps = codepoints(text);
    for (std::size_t n = 2; n <= 3; ++n) {
        if (cps.size() < n) continue;
        for (std::size_t i = 0; i + n <= cps.size(); ++i) {
            std::uint64_t h = fnv_mix(kFnvOffset, static_cast<std::uint32_t>(n));
            for (std::size_t k = 0; k < n; ++k) h = fnv_mix(h, static_cast<std::uint32_t>(cps[i + k]));
            out[h % block] += 1.0;
        }
    }
    double norm = 0.0;
    for (double v : out) norm += v * v;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& v : out) v /= norm;
    }
    return out;
}

std::vector<double> HashedNgramEncoder::encode(std::string_view premise,
                                               std::string_view hypothesis) const {
    const std::size_t block = dim_ / 4;
    const auto u = text_profile(premise);
    const auto v = text_profile(hypothesis);
    std::vector<double> out(dim_, 0.0);
    for (std::size_t i = 0; i < block; ++i) {
        out[i] = u[i];
        out[block + i] = v[i];
        out[2 * block + i] = u[i] * v[i];
        out[3 * block + i] = std::abs(u[i] - v[i]);
    }
    return out;
}

EmbeddingFileBackend::EmbeddingFileBackend(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open embedding file " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_array())
        throw ParseError(path.string() + ": top-level value must be an array");
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const std::string where = path.string() + " record " + std::to_string(i);
        if (!rec.is_object() || !rec.contains("premise") || !rec.contains("hypothesis") ||
            !rec.contains("vec") || !rec["vec"].is_array())
            throw SchemaError(where + ": expected {\"premise\", \"hypothesis\", \"vec\"}");
        std::vector<double> vec = rec["vec"].get<std::vector<double>>();
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_ || dim_ == 0)
            throw SchemaError(where + ": inconsistent or empty vector dimension");
        std::string key = rec["premise"].get<std::string>() + '\x1e' +
                          rec["hypothesis"].get<std::string>();
        table_[std::move(key)] = std::move(vec);
    }
    if (table_.empty())
        throw SchemaError(path.string() + ": embedding file has no records");
}

std::vector<double> EmbeddingFileBackend::encode(std::string_view premise,
                                                 std::string_view hypothesis) const {
    std::string key;
    key.reserve(premise.size() + 1 + hypothesis.size());
    key.append(premise).push_back('\x1e');
    key.append(hypothesis);
    auto it = table_.find(key);
    if (it == table_.end())
        throw EncodeError("no precomputed embedding for pair (premise starts \"" +
                          std::string(premise.substr(0, 32)) + "\")");
    return it->second;
}

double LossWeights::for_tier(QualityTier t) const {
    switch (t) {
        case QualityTier::Gold: return gold;
        case QualityTier::Rephrased: return rephrased;
        case QualityTier::PseudoLabelled: return pseudo;
        case QualityTier::Unlabelled:
            throw TierError("unlabelled samples have no loss weight");
    }
    throw TierError("unknown tier");
}

std::optional<std::string> LossWeights::ordering_warning() const {
    if (gold > rephrased && rephrased > pseudo) return std::nullopt;
    std::ostringstream os;
    os << "loss weights do not satisfy gold > rephrased > pseudo (got " << gold << ", "
       << rephrased << ", " << pseudo << ")";
    return os.str();
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be positive and finite");
    if (epochs < 0)
        throw ConfigError("epochs must be >= 0");
    if (batch_size < 1)
        throw ConfigError("batch_size must be >= 1");
    if (loss_weights.gold < 0.0 || loss_weights.rephrased < 0.0 || loss_weights.pseudo < 0.0)
        throw ConfigError("loss weights must be nonnegative");
    for (auto e : {stage_epochs.pseudo, stage_epochs.rephrased, stage_epochs.gold})
        if (e && *e < 0) throw ConfigError("stage epochs must be >= 0");
}

ClassifierModel::ClassifierModel(std::shared_ptr<const EncoderBackend> encoder,
                                 PairingRule pairing, double clamp_lo, double clamp_hi)
    : encoder_(std::move(encoder)), pairing_(pairing), clamp_lo_(clamp_lo), clamp_hi_(clamp_hi) {
    if (!encoder_)
        throw ConfigError("classifier needs an encoder backend");
    if (!(clamp_lo_ < clamp_hi_))
        throw ConfigError("invalid logit clamp bounds");
    head_.w.assign(encoder_->dim(), 0.0);
}

void ClassifierModel::set_head(HeadParams h) {
    if (h.w.size() != encoder_->dim())
        throw CheckpointError("head width " + std::to_string(h.w.size()) +
                              " does not match encoder dimension " + std::to_string(encoder_->dim()));
    head_ = std::move(h);
}

std::pair<std::string_view, std::string_view> ClassifierModel::pair_texts(const Sample& s) const {
    switch (pairing_) {
        case PairingRule::TargetElseSource:
            return {is_blank(s.tgt) ? std::string_view(s.src) : std::string_view(s.tgt), s.hyp};
        case PairingRule::SourceAlways:
            return {s.src, s.hyp};
    }
    return {s.src, s.hyp};
}

std::vector<double> ClassifierModel::features(const Sample& s) const {
    const auto [premise, hypothesis] = pair_texts(s);
    return encoder_->encode(premise, hypothesis);
}

double ClassifierModel::predict_features(std::span<const double> features) const {
    double z = head_.b;
    for (std::size_t i = 0; i < features.size(); ++i) z += head_.w[i] * features[i];
    z = std::clamp(z, clamp_lo_, clamp_hi_);
    return sigmoid(z);
}

double ClassifierModel::predict(const Sample& sample) const {
    if (sample.hyp.empty())
        throw InvariantError("predict: sample " + sample.id + " has an empty hyp");
    const auto f = features(sample);
    return predict_features(f);
}

double bce(double y, double f) {
    if (!(y >= 0.0 && y <= 1.0))
        throw DomainError("bce target must lie in [0, 1]");
    if (!(f > 0.0 && f < 1.0))
        throw DomainError("bce prediction must lie strictly inside (0, 1)");
    return -(y * std::log(f) + (1.0 - y) * std::log(1.0 - f));
}

double weighted_bce(QualityTier tier, const LossWeights& weights, double y, double f) {
    return weights.for_tier(tier) * bce(y, f);
}

namespace detail {

double training_target(const Sample& s) {
    if (s.p_hal) return *s.p_hal;
    if (s.label) return *s.label == Label::Hallucination ? 1.0 : 0.0;
    throw SchemaError("sample " + s.id + " has neither p(hal) nor label; not trainable");
}

void check_tier(const Dataset& d, QualityTier t, const char* op) {
    for (const Sample& s : d.samples) {
        if (s.tier != t)
            throw TierError(std::string(op) + ": expected tier " + to_string(t) + ", sample " +
                            s.id + " is " + to_string(s.tier));
    }
}

std::vector<TrainItem> make_items(const ClassifierModel& model, const Dataset& d, double weight) {
    std::vector<TrainItem> items;
    items.reserve(d.size());
    for (const Sample& s : d.samples) {
        if (s.tier == QualityTier::Unlabelled)
            throw TierError("unlabelled sample " + s.id + " is never valid training input");
        TrainItem it;
        it.target = training_target(s);
        it.weight = weight;
        it.features = model.features(s);
        items.push_back(std::move(it));
    }
    return items;
}

LossGrad head_loss_grad(const std::vector<TrainItem>& items, std::span<const std::size_t> batch,
                        const HeadParams& head, double clamp_lo, double clamp_hi) {
    LossGrad out;
    out.grad_w.assign(head.w.size(), 0.0);
    if (batch.empty()) return out;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t idx : batch) {
        const TrainItem& it = items[idx];
        double z = head.b;
        for (std::size_t i = 0; i < it.features.size(); ++i) z += head.w[i] * it.features[i];
        const bool clamped = z < clamp_lo || z > clamp_hi;
        z = std::clamp(z, clamp_lo, clamp_hi);
        const double f = sigmoid(z);
        out.loss += inv_n * it.weight * bce(it.target, f);
        if (!clamped) {
            const double g = inv_n * it.weight * (f - it.target);
            for (std::size_t i = 0; i < it.features.size(); ++i)
                out.grad_w[i] += g * it.features[i];
            out.grad_b += g;
        }
    }
    return out;
}

void run_phase(ClassifierModel& model, std::vector<TrainItem>& items, const TrainConfig& cfg,
               int epochs, const std::string& stage, TrainingTrace& trace) {
    trace.stages.push_back(stage);
    if (items.empty() || epochs == 0) return;

    SeededRng rng(cfg.seed);
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    HeadParams& head = model.head();
    const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            std::span<const std::size_t> batch(order.data() + start, end - start);
            LossGrad lg = head_loss_grad(items, batch, head, model.clamp_lo(), model.clamp_hi());
            loss_sum += lg.loss * static_cast<double>(batch.size());
            for (std::size_t i = 0; i < head.w.size(); ++i)
                head.w[i] -= cfg.learning_rate * lg.grad_w[i];
            head.b -= cfg.learning_rate * lg.grad_b;
        }
        const double mean_loss = loss_sum / static_cast<double>(items.size());
        if (!std::isfinite(mean_loss))
            throw NonFiniteLoss("stage " + stage + " epoch " + std::to_string(epoch) +
                                ": mean loss is not finite");
        trace.entries.push_back({stage, epoch, mean_loss});
    }
}

}  // namespace detail

TrainingTrace train_baseline(ClassifierModel& model, const Dataset& d_g, const TrainConfig& cfg) {
    cfg.validate();
    detail::check_tier(d_g, QualityTier::Gold, "train_baseline");
    for (const Sample& s : d_g.samples)
        if (!s.p_hal)
            throw SchemaError("train_baseline: gold sample " + s.id + " has no p(hal)");

    auto items = detail::make_items(model, d_g, 1.0);
    TrainingTrace trace;
    detail::run_phase(model, items, cfg, cfg.epochs, "baseline", trace);
    return trace;
}

TrainingTrace train_crlft(ClassifierModel& model, const Dataset& d_g, const Dataset& d_r,
                          const Dataset& d_pl, const TrainConfig& cfg) {
    cfg.validate();
    detail::check_tier(d_g, QualityTier::Gold, "train_crlft");
    detail::check_tier(d_r, QualityTier::Rephrased, "train_crlft");
    detail::check_tier(d_pl, QualityTier::PseudoLabelled, "train_crlft");
    if (auto warn = cfg.loss_weights.ordering_warning())
        std::cerr << "[shroom] warning: " << *warn << "\n";

    std::vector<detail::TrainItem> items;
    auto add = [&](const Dataset& d, QualityTier t) {
        auto part = detail::make_items(model, d, cfg.loss_weights.for_tier(t));
        std::move(part.begin(), part.end(), std::back_inserter(items));
    };
    add(d_g, QualityTier::Gold);
    add(d_r, QualityTier::Rephrased);
    add(d_pl, QualityTier::PseudoLabelled);

    TrainingTrace trace;
    detail::run_phase(model, items, cfg, cfg.epochs, "crlft", trace);
    return trace;
}

TrainingTrace train_sequential(ClassifierModel& model, const Dataset& d_pl, const Dataset& d_r,
                               const Dataset& d_g, const TrainConfig& cfg) {
    cfg.validate();
    detail::check_tier(d_pl, QualityTier::PseudoLabelled, "train_sequential");
    detail::check_tier(d_r, QualityTier::Rephrased, "train_sequential");
    detail::check_tier(d_g, QualityTier::Gold, "train_sequential");

    TrainingTrace trace;
    auto stage = [&](const Dataset& d, std::optional<int> epochs_override, const char* tag) {
        auto items = detail::make_items(model, d, 1.0);
        detail::run_phase(model, items, cfg, epochs_override.value_or(cfg.epochs), tag, trace);
    };
    stage(d_pl, cfg.stage_epochs.pseudo, "seq/pseudo");
    stage(d_r, cfg.stage_epochs.rephrased, "seq/rephrased");
    stage(d_g, cfg.stage_epochs.gold, "seq/gold");
    return trace;
}

}  // namespace shroom
