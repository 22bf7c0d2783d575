#include "shroom/checkpoint.hpp"

#include <fstream>

namespace shroom {

namespace {

constexpr const char* kFormat = "shroom-checkpoint-v1";

}  // namespace

bool backend_registered(const std::string& backend_id) {
    return backend_id == "hashed-ngram-v1" || backend_id == "external-embedding-v1" ||
           backend_id == "ensemble-v1";
}

std::shared_ptr<const EncoderBackend> make_encoder(const std::string& backend_id,
                                                   const nlohmann::json& backend_config) {
    if (backend_id == "hashed-ngram-v1") {
        const std::size_t dim =
            backend_config.value("dim", HashedNgramEncoder::kDefaultDim);
        return std::make_shared<HashedNgramEncoder>(dim);
    }
    if (backend_id == "external-embedding-v1") {
        if (!backend_config.contains("path"))
            throw CheckpointError("external-embedding-v1 needs a \"path\" in backend_config");
        return std::make_shared<EmbeddingFileBackend>(
            backend_config["path"].get<std::string>());
    }
    throw CheckpointError("no registered adapter for backend \"" + backend_id + "\"");
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    nlohmann::json doc = {
        {"format", kFormat},
        {"kind", ck.kind},
        {"backend", ck.backend_id},
        {"backend_config", ck.backend_config},
        {"head", {{"w", ck.w}, {"b", ck.b}}},
        {"provenance", ck.provenance},
    };
    if (ck.kind == "classifier") {
        doc["pairing"] = ck.pairing;
        doc["clamp"] = {ck.clamp_lo, ck.clamp_hi};
    }

    std::error_code ec;
    if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open checkpoint " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("format", std::string()) != kFormat)
        throw CheckpointError(path.string() + ": not a " + std::string(kFormat) + " file");

    Checkpoint ck;
    try {
        ck.kind = doc.at("kind").get<std::string>();
        ck.backend_id = doc.at("backend").get<std::string>();
        ck.backend_config = doc.value("backend_config", nlohmann::json::object());
        ck.w = doc.at("head").at("w").get<std::vector<double>>();
        ck.b = doc.at("head").at("b").get<double>();
        ck.provenance = doc.value("provenance", nlohmann::json::object());
        if (ck.kind == "classifier") {
            ck.pairing = doc.at("pairing").get<std::string>();
            ck.clamp_lo = doc.at("clamp").at(0).get<double>();
            ck.clamp_hi = doc.at("clamp").at(1).get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(path.string() + ": " + e.what());
    }

    if (!backend_registered(ck.backend_id))
        throw CheckpointError(path.string() + ": no registered adapter for backend \"" +
                              ck.backend_id + "\"");
    if (ck.kind != "classifier" && ck.kind != "ensemble")
        throw CheckpointError(path.string() + ": unknown checkpoint kind \"" + ck.kind + "\"");
    if (ck.kind == "ensemble" && ck.backend_id != "ensemble-v1")
        throw CheckpointError(path.string() + ": ensemble checkpoints use backend ensemble-v1");
    if (ck.kind == "classifier" && ck.backend_id == "ensemble-v1")
        throw CheckpointError(path.string() + ": backend ensemble-v1 is not an encoder");
    return ck;
}

Checkpoint checkpoint_from_model(const ClassifierModel& model, nlohmann::json provenance) {
    Checkpoint ck;
    ck.kind = "classifier";
    ck.backend_id = model.encoder().id();
    if (ck.backend_id == "hashed-ngram-v1") {
        ck.backend_config = {{"dim", model.encoder().dim()}};
    } else if (auto* ext = dynamic_cast<const EmbeddingFileBackend*>(&model.encoder())) {
        ck.backend_config = {{"path", ext->path().string()}};
    }
    ck.pairing = to_string(model.pairing());
    ck.clamp_lo = model.clamp_lo();
    ck.clamp_hi = model.clamp_hi();
    ck.w = model.head().w;
    ck.b = model.head().b;
    ck.provenance = std::move(provenance);
    return ck;
}

ClassifierModel model_from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "classifier")
        throw CheckpointError("expected a classifier checkpoint, got kind \"" + ck.kind + "\"");
    auto encoder = make_encoder(ck.backend_id, ck.backend_config);
    ClassifierModel model(encoder, pairing_from_string(ck.pairing), ck.clamp_lo, ck.clamp_hi);
    model.set_head({ck.w, ck.b});
    return model;
}

Checkpoint checkpoint_from_ensemble(const EnsembleParams& params, nlohmann::json provenance) {
    Checkpoint ck;
    ck.kind = "ensemble";
    ck.backend_id = "ensemble-v1";
    ck.w.assign(params.w.begin(), params.w.end());
    ck.b = params.b;
    ck.provenance = std::move(provenance);
    return ck;
}

EnsembleParams ensemble_from_checkpoint(const Checkpoint& ck) {
    if (ck.kind != "ensemble" || ck.backend_id != "ensemble-v1")
        throw CheckpointError("expected an ensemble-v1 checkpoint");
    if (ck.w.size() != 3)
        throw CheckpointError("ensemble checkpoint must carry exactly 3 weights");
    EnsembleParams p;
    std::copy(ck.w.begin(), ck.w.end(), p.w.begin());
    p.b = ck.b;
    return p;
}

}  // namespace shroom
