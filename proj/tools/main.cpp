#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shroom/augment.hpp"
#include "shroom/checkpoint.hpp"
#include "shroom/classifier.hpp"
#include "shroom/client.hpp"
#include "shroom/config.hpp"
#include "shroom/corpus.hpp"
#include "shroom/ensemble.hpp"
#include "shroom/manifest.hpp"
#include "shroom/metrics.hpp"

using namespace shroom;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void require_file(const std::filesystem::path& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw ConfigError(what + " not found: " + path.string());
}

PipelineConfig load_config_or_default(const std::string& config_path) {
    if (config_path.empty()) return default_pipeline_config();
    require_file(config_path, "config file");
    return load_pipeline_config(config_path);
}

std::unique_ptr<AnnotatorClient> build_client(const PipelineConfig& cfg) {
    AnnotatorOptions opts;
    opts.max_retries = cfg.client.max_retries;
    opts.timeout = std::chrono::milliseconds(cfg.client.timeout_ms);
    opts.max_in_flight = cfg.client.max_in_flight;
    opts.min_delay = std::chrono::milliseconds(cfg.client.min_delay_ms);

    if (cfg.client.kind == "mock") {
        if (cfg.client.script.empty())
            throw ConfigError("client.kind is \"mock\" but no client.script is configured");
        require_file(cfg.client.script, "mock script");
        return std::make_unique<MockClient>(
            MockClient::from_script_file(cfg.client.script, opts));
    }
    if (cfg.client.endpoint.empty() || cfg.client.model.empty())
        throw ConfigError("client.kind is \"http\" but endpoint/model are not configured");
    const char* key = std::getenv(cfg.client.api_key_env.c_str());
    if (!key || !*key)
        throw ConfigError("environment variable " + cfg.client.api_key_env +
                          " is not set (the API key is only read from the environment)");
    return std::make_unique<HttpAnnotatorClient>(
        HttpAnnotatorClient::Endpoint{cfg.client.endpoint, cfg.client.model, key}, opts);
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
    std::error_code ec;
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + path.string());
}

json trace_to_json(const TrainingTrace& trace) {
    json entries = json::array();
    for (const auto& e : trace.entries)
        entries.push_back({{"stage", e.stage}, {"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
    return {{"stages", trace.stages}, {"entries", entries}};
}

// -------------------------------------------------------------------------
// augment

struct AugmentArgs {
    std::string mode;
    std::string in;
    std::string out;
    std::string exemplars;
    std::string report;
    std::int64_t seed = -1;
};

int cmd_augment(const PipelineConfig& cfg, const AugmentArgs& args) {
    const auto t0 = Clock::now();
    const std::uint64_t seed =
        args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.seeds.front();

    std::filesystem::path in_path, out_path;
    if (args.mode == "pseudo") {
        in_path = args.in.empty() ? cfg.data_path("unlabelled") : std::filesystem::path(args.in);
        out_path = args.out.empty() ? cfg.data_path("pseudo") : std::filesystem::path(args.out);
    } else {
        in_path = args.in.empty() ? cfg.data_path("gold") : std::filesystem::path(args.in);
        out_path =
            args.out.empty() ? cfg.data_path("rephrased") : std::filesystem::path(args.out);
    }
    require_file(in_path, "input dataset");

    auto client = build_client(cfg);
    std::unique_ptr<AuditLog> audit;
    if (!cfg.client.audit_log.empty())
        audit = std::make_unique<AuditLog>(cfg.client.audit_log);

    Dataset out;
    AugmentationReport report;
    std::filesystem::path exemplar_path;
    if (args.mode == "pseudo") {
        const Dataset unl = load_dataset(in_path, QualityTier::Unlabelled, Split::Train);
        exemplar_path = args.exemplars.empty() ? cfg.data_path("gold")
                                               : std::filesystem::path(args.exemplars);
        require_file(exemplar_path, "exemplar dataset");
        const Dataset gold = load_dataset(exemplar_path, QualityTier::Gold, Split::Train);
        std::tie(out, report) = pseudo_label(unl, *client, gold.samples, seed, audit.get());
    } else {
        const Dataset gold = load_dataset(in_path, QualityTier::Gold, Split::Train);
        std::tie(out, report) = rephrase(gold, *client, seed, audit.get());
    }

    write_dataset(out, out_path);
    const std::filesystem::path report_path =
        args.report.empty()
            ? std::filesystem::path(cfg.run_dir) / "reports" / ("augment-" + args.mode + ".json")
            : std::filesystem::path(args.report);
    write_json_file(report_to_json(report), report_path);

    auto manifest = RunManifest::load_or_create(cfg.manifest_path(), config_snapshot(cfg));
    manifest.record_dataset(args.mode == "pseudo" ? "unlabelled" : "gold", in_path);
    if (!exemplar_path.empty()) manifest.record_dataset("gold", exemplar_path);
    manifest.record_artifact(out_path);
    manifest.record_artifact(report_path);
    manifest.record_stage("augment/" + args.mode,
                          {{"input", in_path.string()},
                           {"output", out_path.string()},
                           {"report", report_path.string()},
                           {"seed", seed},
                           {"accepted", report.accepted},
                           {"rejected", report.rejected}});
    manifest.record_timing("augment/" + args.mode, seconds_since(t0));
    manifest.save();

    std::cout << "augment " << args.mode << ": accepted " << report.accepted << ", rejected "
              << report.rejected << " -> " << out_path.string() << "\n";
    return 0;
}

// -------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string strategy;
    std::int64_t seed = -1;
    std::string out;
    std::string trace;
};

int cmd_train(const PipelineConfig& cfg, const TrainArgs& args) {
    const auto t0 = Clock::now();
    const std::uint64_t seed =
        args.seed >= 0 ? static_cast<std::uint64_t>(args.seed) : cfg.seeds.front();

    TrainConfig tc = args.strategy == "baseline"     ? cfg.train_baseline
                     : args.strategy == "crlft"      ? cfg.train_crlft
                                                     : cfg.train_sequential;
    tc.seed = seed;

    auto load_role = [&](const char* role, QualityTier tier, json& fingerprints) {
        const auto path = cfg.data_path(role);
        require_file(path, std::string(role) + " dataset");
        fingerprints[role] = file_fingerprint(path);
        return load_dataset(path, tier, Split::Train);
    };

    auto encoder = make_encoder(cfg.backend, cfg.backend_config);
    ClassifierModel model(encoder, tc.pairing);

    json fingerprints = json::object();
    TrainingTrace trace;
    if (args.strategy == "baseline") {
        const Dataset d_g = load_role("gold", QualityTier::Gold, fingerprints);
        trace = train_baseline(model, d_g, tc);
    } else if (args.strategy == "crlft") {
        const Dataset d_g = load_role("gold", QualityTier::Gold, fingerprints);
        const Dataset d_r = load_role("rephrased", QualityTier::Rephrased, fingerprints);
        const Dataset d_pl = load_role("pseudo", QualityTier::PseudoLabelled, fingerprints);
        trace = train_crlft(model, d_g, d_r, d_pl, tc);
    } else {
        const Dataset d_pl = load_role("pseudo", QualityTier::PseudoLabelled, fingerprints);
        const Dataset d_r = load_role("rephrased", QualityTier::Rephrased, fingerprints);
        const Dataset d_g = load_role("gold", QualityTier::Gold, fingerprints);
        trace = train_sequential(model, d_pl, d_r, d_g, tc);
    }

    const std::string tag = args.strategy + "-seed" + std::to_string(seed);
    const std::filesystem::path out_path =
        args.out.empty() ? std::filesystem::path(cfg.run_dir) / "checkpoints" / (tag + ".json")
                         : std::filesystem::path(args.out);
    const std::filesystem::path trace_path =
        args.trace.empty() ? std::filesystem::path(cfg.run_dir) / "traces" / (tag + ".json")
                           : std::filesystem::path(args.trace);

    json prov = {{"strategy", args.strategy},
                 {"seed", seed},
                 {"datasets", fingerprints},
                 {"pairing", to_string(tc.pairing)}};
    if (args.strategy == "crlft")
        prov["loss_weights"] = {{"gold", tc.loss_weights.gold},
                                {"rephrased", tc.loss_weights.rephrased},
                                {"pseudo", tc.loss_weights.pseudo}};

    save_checkpoint(checkpoint_from_model(model, prov), out_path);
    write_json_file(trace_to_json(trace), trace_path);

    auto manifest = RunManifest::load_or_create(cfg.manifest_path(), config_snapshot(cfg));
    for (const auto& [role, fp] : fingerprints.items())
        manifest.record_dataset(role, cfg.data_path(role));
    manifest.record_artifact(out_path);
    manifest.record_artifact(trace_path);
    json stage = {{"checkpoint", out_path.string()},
                  {"trace", trace_path.string()},
                  {"seed", seed},
                  {"epochs", tc.epochs},
                  {"learning_rate", tc.learning_rate},
                  {"batch_size", tc.batch_size}};
    if (args.strategy == "crlft")
        stage["loss_weights"] = prov["loss_weights"];
    manifest.record_stage("train/" + tag, stage);
    manifest.record_timing("train/" + tag, seconds_since(t0));
    manifest.save();

    const double last_loss = trace.entries.empty() ? 0.0 : trace.entries.back().mean_loss;
    std::cout << "train " << args.strategy << " seed " << seed << ": final mean loss "
              << last_loss << " -> " << out_path.string() << "\n";
    return 0;
}

// -------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
    std::string base, crlft, seq;
    std::string val;
    std::string out;
    std::string params_preset;
    std::string triples_out;
    std::string targets;  // override of cfg.ensemble_targets
};

int cmd_ensemble(const PipelineConfig& cfg, const EnsembleArgs& args) {
    const auto t0 = Clock::now();
    const std::filesystem::path out_path =
        args.out.empty() ? std::filesystem::path(cfg.run_dir) / "checkpoints" / "ensemble.json"
                         : std::filesystem::path(args.out);

    auto manifest = RunManifest::load_or_create(cfg.manifest_path(), config_snapshot(cfg));

    EnsembleParams params;
    json prov;
    json stage;
    if (!args.params_preset.empty()) {
        params = ensemble_preset(args.params_preset);
        prov = {{"preset", args.params_preset}};
        stage = {{"preset", args.params_preset}};
    } else {
        if (args.base.empty() || args.crlft.empty() || args.seq.empty())
            throw ConfigError(
                "ensemble fitting needs --base, --crlft and --seq checkpoints (or --params)");
        for (const auto& p : {args.base, args.crlft, args.seq})
            require_file(p, "checkpoint");

        const ClassifierModel base = model_from_checkpoint(load_checkpoint(args.base));
        const ClassifierModel rlft = model_from_checkpoint(load_checkpoint(args.crlft));
        const ClassifierModel seq = model_from_checkpoint(load_checkpoint(args.seq));

        const std::filesystem::path val_path =
            args.val.empty() ? cfg.data_path("val") : std::filesystem::path(args.val);
        require_file(val_path, "validation dataset");
        const Dataset d_v = load_dataset(val_path, QualityTier::Gold, Split::Val);

        const auto triples = collect_triples(base, rlft, seq, d_v);
        const std::string target_mode = args.targets.empty() ? cfg.ensemble_targets : args.targets;
        if (target_mode != "soft" && target_mode != "binary")
            throw ConfigError("--targets must be soft or binary");
        std::vector<double> targets;
        targets.reserve(d_v.size());
        for (const Sample& s : d_v.samples)
            targets.push_back(target_mode == "soft"
                                  ? *s.p_hal
                                  : (*s.label == Label::Hallucination ? 1.0 : 0.0));

        const EnsembleFitResult fit = fit_ensemble(triples, targets, cfg.ensemble_fit);
        params = fit.params;
        prov = {{"fitted_on", val_path.string()},
                {"val_fingerprint", file_fingerprint(val_path)},
                {"targets", target_mode},
                {"final_loss", fit.final_loss},
                {"iters", fit.iters},
                {"components",
                 {{"base", file_fingerprint(args.base)},
                  {"crlft", file_fingerprint(args.crlft)},
                  {"seq", file_fingerprint(args.seq)}}}};
        stage = {{"val", val_path.string()},
                 {"triples", triples.size()},
                 {"final_loss", fit.final_loss},
                 {"iters", fit.iters}};
        manifest.record_dataset("val", val_path);

        if (!args.triples_out.empty()) {
            write_triples(triples, args.triples_out);
            manifest.record_artifact(args.triples_out);
            stage["triples_file"] = args.triples_out;
        }
        std::cout << "ensemble fit on " << triples.size() << " triples: final loss "
                  << fit.final_loss << " after " << fit.iters << " iterations\n";
    }

    save_checkpoint(checkpoint_from_ensemble(params, prov), out_path);
    stage["checkpoint"] = out_path.string();
    stage["w"] = params.w;
    stage["b"] = params.b;
    manifest.record_artifact(out_path);
    manifest.record_stage("ensemble", stage);
    manifest.record_timing("ensemble", seconds_since(t0));
    manifest.save();

    std::cout << "ensemble params w = (" << params.w[0] << ", " << params.w[1] << ", "
              << params.w[2] << "), b = " << params.b << " -> " << out_path.string() << "\n";
    return 0;
}

// -------------------------------------------------------------------------
// predict

struct PredictArgs {
    std::string checkpoint;                 // single-model mode
    std::string ensemble, base, crlft, seq; // ensemble mode
    std::string data;
    std::string tier = "gold";
    std::string out;
    double threshold = -1.0;
};

int cmd_predict(const PipelineConfig& cfg, const PredictArgs& args) {
    const auto t0 = Clock::now();
    const double threshold = args.threshold >= 0.0 ? args.threshold : cfg.threshold;

    const bool ensemble_mode = !args.ensemble.empty();
    if (ensemble_mode == !args.checkpoint.empty())
        throw ConfigError("pass either --checkpoint or --ensemble with --base/--crlft/--seq");

    const std::filesystem::path data_path =
        args.data.empty() ? cfg.data_path("test") : std::filesystem::path(args.data);
    require_file(data_path, "input dataset");
    const Dataset data = load_dataset(data_path, tier_from_string(args.tier), Split::Test);

    std::vector<double> probs;
    probs.reserve(data.size());
    if (ensemble_mode) {
        if (args.base.empty() || args.crlft.empty() || args.seq.empty())
            throw ConfigError("ensemble prediction needs --base, --crlft and --seq");
        for (const auto& p : {args.ensemble, args.base, args.crlft, args.seq})
            require_file(p, "checkpoint");
        const EnsembleParams params = ensemble_from_checkpoint(load_checkpoint(args.ensemble));
        const ClassifierModel base = model_from_checkpoint(load_checkpoint(args.base));
        const ClassifierModel rlft = model_from_checkpoint(load_checkpoint(args.crlft));
        const ClassifierModel seq = model_from_checkpoint(load_checkpoint(args.seq));
        for (const auto& triple : collect_triples(base, rlft, seq, data))
            probs.push_back(apply_ensemble(params, triple));
    } else {
        require_file(args.checkpoint, "checkpoint");
        const ClassifierModel model = model_from_checkpoint(load_checkpoint(args.checkpoint));
        for (const Sample& s : data.samples) probs.push_back(model.predict(s));
    }

    json records = json::array();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        records.push_back({{"id", data.samples[i].id},
                           {"label", to_string(binarize(probs[i], threshold))},
                           {"p(hal)", probs[i]}});
    }
    const std::filesystem::path out_path =
        args.out.empty() ? std::filesystem::path(cfg.run_dir) / "predictions" /
                               (data_path.stem().string() + "-predictions.json")
                         : std::filesystem::path(args.out);
    write_json_file(records, out_path);

    auto manifest = RunManifest::load_or_create(cfg.manifest_path(), config_snapshot(cfg));
    manifest.record_artifact(out_path);
    manifest.record_stage("predict/" + out_path.filename().string(),
                          {{"data", data_path.string()},
                           {"output", out_path.string()},
                           {"records", probs.size()},
                           {"mode", ensemble_mode ? "ensemble" : "single"},
                           {"threshold", threshold}});
    manifest.record_timing("predict/" + out_path.filename().string(), seconds_since(t0));
    manifest.save();

    std::cout << "predict: " << probs.size() << " records -> " << out_path.string() << "\n";
    return 0;
}

// -------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
    std::vector<std::string> preds;
    std::string gold;
    std::string tier = "gold";
    std::string out;
    double threshold = -1.0;
    std::string model_name;
    std::string method_name = "-";
};

int cmd_evaluate(const PipelineConfig& cfg, const EvaluateArgs& args) {
    const auto t0 = Clock::now();
    const double threshold = args.threshold >= 0.0 ? args.threshold : cfg.threshold;

    const std::filesystem::path gold_path =
        args.gold.empty() ? cfg.data_path("test") : std::filesystem::path(args.gold);
    require_file(gold_path, "gold dataset");
    const Dataset gold = load_dataset(gold_path, tier_from_string(args.tier), Split::Test);

    std::vector<MetricsReport> reports;
    for (const std::string& pred_file : args.preds) {
        require_file(pred_file, "prediction file");
        std::ifstream in(pred_file, std::ios::binary);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(pred_file + ": " + e.what());
        }
        if (!doc.is_array())
            throw ConfigError(pred_file + ": top-level value must be an array");
        if (doc.size() != gold.size())
            throw LengthMismatch(pred_file + ": " + std::to_string(doc.size()) +
                                 " predictions for " + std::to_string(gold.size()) +
                                 " gold samples");
        std::vector<double> probs;
        probs.reserve(doc.size());
        for (std::size_t i = 0; i < doc.size(); ++i) {
            const auto& rec = doc[i];
            if (!rec.is_object() || !rec.contains("p(hal)"))
                throw ConfigError(pred_file + " record " + std::to_string(i) +
                                  ": missing \"p(hal)\"");
            if (rec.contains("id") && rec["id"].get<std::string>() != gold.samples[i].id)
                throw ConfigError(pred_file + " record " + std::to_string(i) +
                                  ": id mismatch against gold sample " + gold.samples[i].id);
            probs.push_back(rec["p(hal)"].get<double>());
        }
        reports.push_back(score(probs, gold, threshold));
    }

    const RunAggregate aggregate = aggregate_runs(reports);

    json out_doc = {{"threshold", threshold},
                    {"gold", gold_path.string()},
                    {"runs", json::array()},
                    {"aggregate", aggregate_to_json(aggregate)}};
    for (std::size_t i = 0; i < reports.size(); ++i)
        out_doc["runs"].push_back(
            {{"file", args.preds[i]}, {"metrics", metrics_to_json(reports[i])}});

    const std::filesystem::path out_path =
        args.out.empty() ? std::filesystem::path(cfg.run_dir) / "reports" / "metrics.json"
                         : std::filesystem::path(args.out);
    write_json_file(out_doc, out_path);

    const std::string model = args.model_name.empty() ? cfg.backend : args.model_name;
    std::cout << render_metrics_table({{model, args.method_name, aggregate}});

    auto manifest = RunManifest::load_or_create(cfg.manifest_path(), config_snapshot(cfg));
    manifest.record_artifact(out_path);
    manifest.record_stage("evaluate/" + out_path.filename().string(),
                          {{"gold", gold_path.string()},
                           {"report", out_path.string()},
                           {"runs", reports.size()},
                           {"threshold", threshold}});
    manifest.record_timing("evaluate/" + out_path.filename().string(), seconds_since(t0));
    manifest.save();
    return 0;
}

int cmd_verify_manifest(const PipelineConfig& cfg, const std::string& manifest_arg) {
    const std::filesystem::path path =
        manifest_arg.empty() ? cfg.manifest_path() : std::filesystem::path(manifest_arg);
    require_file(path, "manifest");
    const VerifyResult result = verify_manifest_file(path);
    for (const std::string& p : result.problems) std::cout << "FAIL " << p << "\n";
    if (result.ok) {
        std::cout << "manifest OK: " << result.checked << " files verified\n";
        return 0;
    }
    std::cout << "manifest verification failed: " << result.problems.size() << " of "
              << result.checked << " files bad\n";
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hallucination detection pipeline: augment, train, ensemble, predict, evaluate"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "pipeline config file (JSON)");

    AugmentArgs aug;
    auto* augment_cmd = app.add_subcommand("augment", "pseudo-label or rephrase a dataset");
    augment_cmd->add_option("--mode", aug.mode, "pseudo | rephrase")
        ->required()
        ->check(CLI::IsMember({"pseudo", "rephrase"}));
    augment_cmd->add_option("--in", aug.in, "input dataset (default from config)");
    augment_cmd->add_option("--out", aug.out, "output dataset (default from config)");
    augment_cmd->add_option("--exemplars", aug.exemplars, "gold exemplar pool (pseudo mode)");
    augment_cmd->add_option("--report", aug.report, "augmentation report path");
    augment_cmd->add_option("--seed", aug.seed, "seed (default: first config seed)");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "fine-tune one strategy");
    train_cmd->add_option("--strategy", tr.strategy, "baseline | crlft | sequential")
        ->required()
        ->check(CLI::IsMember({"baseline", "crlft", "sequential"}));
    train_cmd->add_option("--seed", tr.seed, "seed (default: first config seed)");
    train_cmd->add_option("--out", tr.out, "checkpoint path");
    train_cmd->add_option("--trace", tr.trace, "training trace path");

    EnsembleArgs en;
    auto* ens_cmd = app.add_subcommand("ensemble", "fit or preset the combiner");
    ens_cmd->add_option("--base", en.base, "baseline checkpoint");
    ens_cmd->add_option("--crlft", en.crlft, "crlft checkpoint");
    ens_cmd->add_option("--seq", en.seq, "sequential checkpoint");
    ens_cmd->add_option("--val", en.val, "validation dataset (default from config)");
    ens_cmd->add_option("--out", en.out, "ensemble checkpoint path");
    ens_cmd->add_option("--params", en.params_preset, "use a named preset instead of fitting");
    ens_cmd->add_option("--triples-out", en.triples_out, "dump collected triples");
    ens_cmd->add_option("--targets", en.targets, "soft | binary");

    PredictArgs pr;
    auto* pred_cmd = app.add_subcommand("predict", "write shared-task prediction records");
    pred_cmd->add_option("--checkpoint", pr.checkpoint, "single-model checkpoint");
    pred_cmd->add_option("--ensemble", pr.ensemble, "ensemble checkpoint");
    pred_cmd->add_option("--base", pr.base, "baseline checkpoint (ensemble mode)");
    pred_cmd->add_option("--crlft", pr.crlft, "crlft checkpoint (ensemble mode)");
    pred_cmd->add_option("--seq", pr.seq, "sequential checkpoint (ensemble mode)");
    pred_cmd->add_option("--data", pr.data, "dataset to predict on (default: test)");
    pred_cmd->add_option("--tier", pr.tier, "tier of the input dataset")
        ->check(CLI::IsMember({"gold", "rephrased", "pseudo", "unlabelled"}));
    pred_cmd->add_option("--out", pr.out, "prediction file path");
    pred_cmd->add_option("--threshold", pr.threshold, "decision threshold");

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "score prediction files against gold");
    eval_cmd->add_option("--pred", ev.preds, "prediction file (repeat for multiple runs)")
        ->required();
    eval_cmd->add_option("--gold", ev.gold, "gold dataset (default: test)");
    eval_cmd->add_option("--tier", ev.tier, "tier of the gold dataset");
    eval_cmd->add_option("--out", ev.out, "metrics report path");
    eval_cmd->add_option("--threshold", ev.threshold, "decision threshold");
    eval_cmd->add_option("--model-name", ev.model_name, "table row: model column");
    eval_cmd->add_option("--method-name", ev.method_name, "table row: method column");

    std::string manifest_arg;
    auto* verify_cmd = app.add_subcommand("verify-manifest", "check run artifacts against the manifest");
    verify_cmd->add_option("--manifest", manifest_arg, "manifest path (default from config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const PipelineConfig cfg = load_config_or_default(config_path);
        if (augment_cmd->parsed()) return cmd_augment(cfg, aug);
        if (train_cmd->parsed()) return cmd_train(cfg, tr);
        if (ens_cmd->parsed()) return cmd_ensemble(cfg, en);
        if (pred_cmd->parsed()) return cmd_predict(cfg, pr);
        if (eval_cmd->parsed()) return cmd_evaluate(cfg, ev);
        if (verify_cmd->parsed()) return cmd_verify_manifest(cfg, manifest_arg);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const LengthMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
