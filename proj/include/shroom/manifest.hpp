#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "shroom/errors.hpp"

namespace shroom {

std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string file_fingerprint(const std::filesystem::path& path);  // IoError

// Per-run ledger of inputs, artifacts and timings. Every command loads or
// creates the manifest of its run directory, records what it consumed and
// produced, and saves. save() refuses to finalize if a referenced artifact
// does not exist. Timings are the only part expected to differ between
// otherwise identical runs.
class RunManifest {
public:
    static RunManifest load_or_create(const std::filesystem::path& manifest_path,
                                      const nlohmann::json& config_snapshot);

    void record_dataset(const std::string& role, const std::filesystem::path& file);
    void record_stage(const std::string& name, nlohmann::json details);
    void record_artifact(const std::filesystem::path& file);  // fingerprinted now
    void record_timing(const std::string& key, double seconds);

    void save();  // ManifestError if a referenced artifact is missing

    const nlohmann::json& doc() const { return doc_; }
    const std::filesystem::path& path() const { return path_; }

private:
    RunManifest(std::filesystem::path path, nlohmann::json doc)
        : path_(std::move(path)), doc_(std::move(doc)) {}

    std::filesystem::path path_;
    nlohmann::json doc_;
};

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> problems;
    std::size_t checked = 0;
};

// Re-checks existence and fingerprint of every dataset and artifact the
// manifest references.
VerifyResult verify_manifest_file(const std::filesystem::path& manifest_path);

}  // namespace shroom
