#include "shroom/config.hpp"

#include <fstream>
#include <set>

namespace shroom {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : obj.items()) {
        if (!known.count(item.key()))
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
    }
}

TrainConfig parse_train(const json& obj, TrainConfig base, const std::string& where) {
    reject_unknown_keys(obj,
                        {"learning_rate", "epochs", "batch_size", "pairing", "stage_epochs"},
                        where);
    base.learning_rate = obj.value("learning_rate", base.learning_rate);
    base.epochs = obj.value("epochs", base.epochs);
    base.batch_size = obj.value("batch_size", base.batch_size);
    if (obj.contains("pairing"))
        base.pairing = pairing_from_string(obj["pairing"].get<std::string>());
    if (obj.contains("stage_epochs")) {
        const json& se = obj["stage_epochs"];
        reject_unknown_keys(se, {"pseudo", "rephrased", "gold"}, where + ".stage_epochs");
        if (se.contains("pseudo")) base.stage_epochs.pseudo = se["pseudo"].get<int>();
        if (se.contains("rephrased")) base.stage_epochs.rephrased = se["rephrased"].get<int>();
        if (se.contains("gold")) base.stage_epochs.gold = se["gold"].get<int>();
    }
    return base;
}

json train_to_json(const TrainConfig& t) {
    json obj = {
        {"learning_rate", t.learning_rate},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"pairing", to_string(t.pairing)},
    };
    json se = json::object();
    if (t.stage_epochs.pseudo) se["pseudo"] = *t.stage_epochs.pseudo;
    if (t.stage_epochs.rephrased) se["rephrased"] = *t.stage_epochs.rephrased;
    if (t.stage_epochs.gold) se["gold"] = *t.stage_epochs.gold;
    if (!se.empty()) obj["stage_epochs"] = se;
    return obj;
}

}  // namespace

std::filesystem::path PipelineConfig::data_path(const std::string& role) const {
    auto it = data.find(role);
    if (it == data.end() || it->second.empty())
        throw ConfigError("no \"" + role + "\" dataset path configured");
    return it->second;
}

std::filesystem::path PipelineConfig::manifest_path() const {
    return std::filesystem::path(run_dir) / "manifest.json";
}

PipelineConfig default_pipeline_config() { return PipelineConfig{}; }

PipelineConfig parse_pipeline_config(const json& doc) {
    if (!doc.is_object())
        throw ConfigError("config root must be a JSON object");
    reject_unknown_keys(doc,
                        {"data", "train", "loss_weights", "ensemble", "client", "seeds",
                         "run_dir", "backend", "threshold"},
                        "config");

    PipelineConfig cfg;

    if (doc.contains("data")) {
        for (const auto& item : doc["data"].items()) {
            static const std::set<std::string> roles = {"gold",   "rephrased", "unlabelled",
                                                        "pseudo", "val",       "test"};
            if (!roles.count(item.key()))
                throw ConfigError("config.data: unknown dataset role \"" + item.key() + "\"");
            cfg.data[item.key()] = item.value().get<std::string>();
        }
    }

    LossWeights weights;
    if (doc.contains("loss_weights")) {
        const json& lw = doc["loss_weights"];
        reject_unknown_keys(lw, {"gold", "rephrased", "pseudo"}, "config.loss_weights");
        weights.gold = lw.value("gold", weights.gold);
        weights.rephrased = lw.value("rephrased", weights.rephrased);
        weights.pseudo = lw.value("pseudo", weights.pseudo);
    }

    TrainConfig defaults;
    defaults.loss_weights = weights;
    if (doc.contains("train")) {
        const json& tr = doc["train"];
        reject_unknown_keys(tr, {"defaults", "baseline", "crlft", "sequential"}, "config.train");
        if (tr.contains("defaults"))
            defaults = parse_train(tr["defaults"], defaults, "config.train.defaults");
        cfg.train_baseline = tr.contains("baseline")
                                 ? parse_train(tr["baseline"], defaults, "config.train.baseline")
                                 : defaults;
        cfg.train_crlft = tr.contains("crlft")
                              ? parse_train(tr["crlft"], defaults, "config.train.crlft")
                              : defaults;
        cfg.train_sequential =
            tr.contains("sequential")
                ? parse_train(tr["sequential"], defaults, "config.train.sequential")
                : defaults;
    } else {
        cfg.train_baseline = cfg.train_crlft = cfg.train_sequential = defaults;
    }

    if (doc.contains("ensemble")) {
        const json& en = doc["ensemble"];
        reject_unknown_keys(
            en, {"learning_rate", "max_iters", "tolerance", "seed", "init", "targets"},
            "config.ensemble");
        cfg.ensemble_fit.learning_rate = en.value("learning_rate", cfg.ensemble_fit.learning_rate);
        cfg.ensemble_fit.max_iters = en.value("max_iters", cfg.ensemble_fit.max_iters);
        cfg.ensemble_fit.tolerance = en.value("tolerance", cfg.ensemble_fit.tolerance);
        cfg.ensemble_fit.seed = en.value("seed", cfg.ensemble_fit.seed);
        const std::string init = en.value("init", std::string("zeros"));
        if (init == "zeros")
            cfg.ensemble_fit.init = EnsembleFitConfig::Init::Zeros;
        else if (init == "random")
            cfg.ensemble_fit.init = EnsembleFitConfig::Init::Random;
        else
            throw ConfigError("config.ensemble.init must be \"zeros\" or \"random\"");
        cfg.ensemble_targets = en.value("targets", cfg.ensemble_targets);
        if (cfg.ensemble_targets != "soft" && cfg.ensemble_targets != "binary")
            throw ConfigError("config.ensemble.targets must be \"soft\" or \"binary\"");
    }

    if (doc.contains("client")) {
        const json& cl = doc["client"];
        reject_unknown_keys(cl,
                            {"kind", "script", "endpoint", "model", "api_key_env", "max_retries",
                             "timeout_ms", "max_in_flight", "min_delay_ms", "audit_log"},
                            "config.client");
        cfg.client.kind = cl.value("kind", cfg.client.kind);
        if (cfg.client.kind != "mock" && cfg.client.kind != "http")
            throw ConfigError("config.client.kind must be \"mock\" or \"http\"");
        cfg.client.script = cl.value("script", cfg.client.script);
        cfg.client.endpoint = cl.value("endpoint", cfg.client.endpoint);
        cfg.client.model = cl.value("model", cfg.client.model);
        cfg.client.api_key_env = cl.value("api_key_env", cfg.client.api_key_env);
        cfg.client.max_retries = cl.value("max_retries", cfg.client.max_retries);
        cfg.client.timeout_ms = cl.value("timeout_ms", cfg.client.timeout_ms);
        cfg.client.max_in_flight = cl.value("max_in_flight", cfg.client.max_in_flight);
        cfg.client.min_delay_ms = cl.value("min_delay_ms", cfg.client.min_delay_ms);
        cfg.client.audit_log = cl.value("audit_log", cfg.client.audit_log);
    }

    if (doc.contains("seeds")) {
        cfg.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
        if (cfg.seeds.empty())
            throw ConfigError("config.seeds must not be empty");
    }

    cfg.run_dir = doc.value("run_dir", cfg.run_dir);

    if (doc.contains("backend")) {
        const json& be = doc["backend"];
        reject_unknown_keys(be, {"id", "dim", "path"}, "config.backend");
        cfg.backend = be.value("id", cfg.backend);
        if (be.contains("dim")) cfg.backend_config["dim"] = be["dim"].get<std::size_t>();
        if (be.contains("path")) cfg.backend_config["path"] = be["path"].get<std::string>();
    }

    cfg.threshold = doc.value("threshold", cfg.threshold);
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
        throw ConfigError("config.threshold must lie in [0, 1]");

    cfg.train_baseline.validate();
    cfg.train_crlft.validate();
    cfg.train_sequential.validate();
    return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    try {
        return parse_pipeline_config(doc);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

nlohmann::json config_snapshot(const PipelineConfig& cfg) {
    json data = json::object();
    for (const auto& [role, path] : cfg.data) data[role] = path;

    const LossWeights& lw = cfg.train_crlft.loss_weights;
    json snap = {
        {"data", data},
        {"train",
         {{"baseline", train_to_json(cfg.train_baseline)},
          {"crlft", train_to_json(cfg.train_crlft)},
          {"sequential", train_to_json(cfg.train_sequential)}}},
        {"loss_weights", {{"gold", lw.gold}, {"rephrased", lw.rephrased}, {"pseudo", lw.pseudo}}},
        {"ensemble",
         {{"learning_rate", cfg.ensemble_fit.learning_rate},
          {"max_iters", cfg.ensemble_fit.max_iters},
          {"tolerance", cfg.ensemble_fit.tolerance},
          {"seed", cfg.ensemble_fit.seed},
          {"init", cfg.ensemble_fit.init == EnsembleFitConfig::Init::Zeros ? "zeros" : "random"},
          {"targets", cfg.ensemble_targets}}},
        {"client",
         {{"kind", cfg.client.kind},
          {"script", cfg.client.script},
          {"endpoint", cfg.client.endpoint},
          {"model", cfg.client.model},
          {"api_key_env", cfg.client.api_key_env},
          {"max_retries", cfg.client.max_retries},
          {"timeout_ms", cfg.client.timeout_ms},
          {"max_in_flight", cfg.client.max_in_flight},
          {"min_delay_ms", cfg.client.min_delay_ms},
          {"audit_log", cfg.client.audit_log}}},
        {"seeds", cfg.seeds},
        {"run_dir", cfg.run_dir},
        {"backend", {{"id", cfg.backend}, {"config", cfg.backend_config}}},
        {"threshold", cfg.threshold},
    };
    return snap;
}

}  // namespace shroom
