#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "shroom/classifier.hpp"
#include "shroom/ensemble.hpp"
#include "shroom/errors.hpp"

namespace shroom {

struct ClientConfig {
    std::string kind = "mock";  // "mock" or "http"
    std::string script;         // mock: rule file
    std::string endpoint;       // http: base URL, e.g. https://host/v1
    std::string model;          // http: model name
    std::string api_key_env = "ANNOTATOR_API_KEY";  // key always via environment
    int max_retries = 2;
    int timeout_ms = 30000;
    int max_in_flight = 1;
    int min_delay_ms = 0;
    std::string audit_log;  // optional JSONL of every call
};

// Everything a pipeline run needs: dataset paths by role (gold, rephrased,
// unlabelled, pseudo, val, test), per-strategy training configs, ensemble
// fit settings, client settings, and the seed list (one seed per run).
struct PipelineConfig {
    std::map<std::string, std::string> data;
    TrainConfig train_baseline;
    TrainConfig train_crlft;
    TrainConfig train_sequential;
    EnsembleFitConfig ensemble_fit;
    std::string ensemble_targets = "soft";  // "soft" (p_hal) or "binary"
    ClientConfig client;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string run_dir = "run";
    std::string backend = "hashed-ngram-v1";
    nlohmann::json backend_config = nlohmann::json::object();
    double threshold = 0.5;

    std::filesystem::path data_path(const std::string& role) const;  // ConfigError if unset
    std::filesystem::path manifest_path() const;
};

PipelineConfig default_pipeline_config();
PipelineConfig parse_pipeline_config(const nlohmann::json& doc);   // ConfigError
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json config_snapshot(const PipelineConfig& cfg);

}  // namespace shroom
