#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "shroom/classifier.hpp"
#include "shroom/ensemble.hpp"
#include "shroom/errors.hpp"

namespace shroom {

// Self-describing parameter container shared by classifier heads and the
// ensemble layer (backend id "ensemble-v1"). Loading refuses any backend
// identifier without a registered adapter.
struct Checkpoint {
    std::string kind;        // "classifier" or "ensemble"
    std::string backend_id;  // "hashed-ngram-v1", "external-embedding-v1", "ensemble-v1"
    nlohmann::json backend_config = nlohmann::json::object();
    std::string pairing = "tgt-else-src";  // classifier only
    double clamp_lo = -15.0;
    double clamp_hi = 15.0;
    std::vector<double> w;
    double b = 0.0;
    nlohmann::json provenance = nlohmann::json::object();  // strategy, seed, fingerprints, ...
};

bool backend_registered(const std::string& backend_id);

// Builds an encoder for a registered classifier backend id. CheckpointError
// for unknown ids, including "ensemble-v1" (not an encoder).
std::shared_ptr<const EncoderBackend> make_encoder(const std::string& backend_id,
                                                   const nlohmann::json& backend_config);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint checkpoint_from_model(const ClassifierModel& model, nlohmann::json provenance);
ClassifierModel model_from_checkpoint(const Checkpoint& ck);

Checkpoint checkpoint_from_ensemble(const EnsembleParams& params, nlohmann::json provenance);
EnsembleParams ensemble_from_checkpoint(const Checkpoint& ck);

}  // namespace shroom
