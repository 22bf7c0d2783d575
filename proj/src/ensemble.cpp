#include "shroom/ensemble.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "shroom/rng.hpp"

namespace shroom {

namespace {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// BCE written in terms of the logit: softplus(z) - t*z. Algebraically equal
// to bce(t, sigmoid(z)) but immune to sigmoid saturating to exactly 0 or 1.
inline double bce_from_logit(double t, double z) {
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    return softplus - t * z;
}

inline double logit_of(const EnsembleParams& p, const PredictionTriple& t) {
    return p.w[0] * t.base + p.w[1] * t.rlft + p.w[2] * t.seq + p.b;
}

void check_pairs(const std::vector<PredictionTriple>& triples, const std::vector<double>& targets) {
    if (triples.size() != targets.size())
        throw LengthMismatch("got " + std::to_string(triples.size()) + " triples for " +
                             std::to_string(targets.size()) + " targets");
    if (triples.empty())
        throw EmptyInput("need at least one (triple, target) pair");
    for (double t : targets)
        if (!(t >= 0.0 && t <= 1.0))
            throw DomainError("ensemble target outside [0, 1]");
}

}  // namespace

EnsembleParams ensemble_preset(const std::string& name) {
    if (name == "paper") {
        EnsembleParams p;
        p.w = {0.52, 1.7, 1.82};
        p.b = -1.7;
        return p;
    }
    throw ConfigError("unknown ensemble preset \"" + name + "\" (known: paper)");
}

double apply_ensemble(const EnsembleParams& params, const PredictionTriple& triple) {
    return sigmoid(logit_of(params, triple));
}

EnsembleParams selector_params(std::size_t component, double scale) {
    if (component > 2)
        throw DomainError("selector component must be 0, 1 or 2");
    EnsembleParams p;
    p.w[component] = scale;
    p.b = -scale / 2.0;
    return p;
}

double ensemble_bce(const EnsembleParams& params, const std::vector<PredictionTriple>& triples,
                    const std::vector<double>& targets) {
    check_pairs(triples, targets);
    double sum = 0.0;
    for (std::size_t i = 0; i < triples.size(); ++i)
        sum += bce_from_logit(targets[i], logit_of(params, triples[i]));
    return sum / static_cast<double>(triples.size());
}

namespace detail {

EnsembleGrad ensemble_loss_grad(const EnsembleParams& params,
                                const std::vector<PredictionTriple>& triples,
                                const std::vector<double>& targets) {
    EnsembleGrad out;
    const double inv_n = 1.0 / static_cast<double>(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const PredictionTriple& t = triples[i];
        const double z = logit_of(params, t);
        out.loss += inv_n * bce_from_logit(targets[i], z);
        const double g = inv_n * (sigmoid(z) - targets[i]);
        out.grad_w[0] += g * t.base;
        out.grad_w[1] += g * t.rlft;
        out.grad_w[2] += g * t.seq;
        out.grad_b += g;
    }
    return out;
}

}  // namespace detail

EnsembleFitResult fit_ensemble(const std::vector<PredictionTriple>& triples,
                               const std::vector<double>& targets,
                               const EnsembleFitConfig& cfg) {
    check_pairs(triples, targets);
    if (!(cfg.learning_rate > 0.0) || cfg.max_iters < 1 || cfg.tolerance < 0.0)
        throw ConfigError("invalid ensemble fit configuration");

    EnsembleFitResult res;
    if (cfg.init == EnsembleFitConfig::Init::Random) {
        SeededRng rng(cfg.seed);
        for (double& w : res.params.w) w = rng.uniform(-0.5, 0.5);
        res.params.b = rng.uniform(-0.5, 0.5);
    }

    double prev = ensemble_bce(res.params, triples, targets);
    if (!std::isfinite(prev))
        throw NonFiniteLoss("ensemble loss not finite at init");
    res.final_loss = prev;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const auto lg = detail::ensemble_loss_grad(res.params, triples, targets);
        for (std::size_t k = 0; k < 3; ++k) res.params.w[k] -= cfg.learning_rate * lg.grad_w[k];
        res.params.b -= cfg.learning_rate * lg.grad_b;

        const double cur = ensemble_bce(res.params, triples, targets);
        if (!std::isfinite(cur))
            throw NonFiniteLoss("ensemble loss not finite at iteration " + std::to_string(iter));
        res.final_loss = cur;
        res.iters = iter;
        if (prev - cur < cfg.tolerance) break;
        prev = cur;
    }
    return res;
}

std::vector<PredictionTriple> collect_triples(const ClassifierModel& base,
                                              const ClassifierModel& rlft,
                                              const ClassifierModel& seq, const Dataset& dataset) {
    std::vector<PredictionTriple> out;
    out.reserve(dataset.size());
    for (const Sample& s : dataset.samples) {
        try {
            PredictionTriple t;
            t.sample_id = s.id;
            t.base = base.predict(s);
            t.rlft = rlft.predict(s);
            t.seq = seq.predict(s);
            out.push_back(std::move(t));
        } catch (const EncodeError& e) {
            throw EncodeError("sample " + s.id + ": " + e.what());
        }
    }
    return out;
}

void write_triples(const std::vector<PredictionTriple>& triples,
                   const std::filesystem::path& path) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& t : triples)
        doc.push_back({{"id", t.sample_id}, {"base", t.base}, {"rlft", t.rlft}, {"seq", t.seq}});
    std::error_code ec;
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + path.string());
}

std::vector<PredictionTriple> load_triples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_array())
        throw ParseError(path.string() + ": top-level value must be an array");

    std::vector<PredictionTriple> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& rec = doc[i];
        const std::string where = path.string() + " record " + std::to_string(i);
        if (!rec.is_object() || !rec.contains("id") || !rec.contains("base") ||
            !rec.contains("rlft") || !rec.contains("seq"))
            throw SchemaError(where + ": expected {\"id\", \"base\", \"rlft\", \"seq\"}");
        PredictionTriple t;
        t.sample_id = rec["id"].get<std::string>();
        t.base = rec["base"].get<double>();
        t.rlft = rec["rlft"].get<double>();
        t.seq = rec["seq"].get<double>();
        for (double v : {t.base, t.rlft, t.seq})
            if (!(v > 0.0 && v < 1.0))
                throw InvariantError(where + ": probabilities must lie strictly inside (0, 1)");
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace shroom
