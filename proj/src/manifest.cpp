#include "shroom/manifest.hpp"

#include <fstream>
#include <sstream>

namespace shroom {

namespace {

constexpr const char* kFormat = "shroom-manifest-v1";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    if (!in.good() && !in.eof())
        throw IoError("failed reading " + path.string());
    return os.str();
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a64_hex(std::string_view bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

std::string file_fingerprint(const std::filesystem::path& path) {
    return fnv1a64_hex(read_file(path));
}

RunManifest RunManifest::load_or_create(const std::filesystem::path& manifest_path,
                                        const nlohmann::json& config_snapshot) {
    nlohmann::json doc;
    if (std::filesystem::exists(manifest_path)) {
        try {
            doc = nlohmann::json::parse(read_file(manifest_path));
        } catch (const nlohmann::json::parse_error& e) {
            throw ManifestError(manifest_path.string() + ": " + e.what());
        }
        if (doc.value("format", std::string()) != kFormat)
            throw ManifestError(manifest_path.string() + ": not a " + std::string(kFormat) +
                                " file");
    } else {
        doc["format"] = kFormat;
        doc["datasets"] = nlohmann::json::object();
        doc["stages"] = nlohmann::json::array();
        doc["artifacts"] = nlohmann::json::object();
        doc["timings"] = nlohmann::json::object();
    }
    doc["config"] = config_snapshot;
    return RunManifest(manifest_path, std::move(doc));
}

void RunManifest::record_dataset(const std::string& role, const std::filesystem::path& file) {
    doc_["datasets"][role] = {{"path", file.string()}, {"fingerprint", file_fingerprint(file)}};
}

void RunManifest::record_stage(const std::string& name, nlohmann::json details) {
    details["name"] = name;
    // a re-run of the same stage replaces its previous entry
    auto& stages = doc_["stages"];
    for (auto& st : stages) {
        if (st.value("name", std::string()) == name) {
            st = std::move(details);
            return;
        }
    }
    stages.push_back(std::move(details));
}

void RunManifest::record_artifact(const std::filesystem::path& file) {
    doc_["artifacts"][file.string()] = file_fingerprint(file);
}

void RunManifest::record_timing(const std::string& key, double seconds) {
    doc_["timings"][key] = seconds;
}

void RunManifest::save() {
    for (const auto& [file, fp] : doc_["artifacts"].items()) {
        (void)fp;
        if (!std::filesystem::exists(file))
            throw ManifestError("manifest references missing artifact " + file);
    }
    for (const auto& [role, entry] : doc_["datasets"].items()) {
        (void)role;
        if (!std::filesystem::exists(entry["path"].get<std::string>()))
            throw ManifestError("manifest references missing dataset " +
                                entry["path"].get<std::string>());
    }

    std::error_code ec;
    if (!path_.parent_path().empty()) std::filesystem::create_directories(path_.parent_path(), ec);
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path_.string() + " for writing");
    out << doc_.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + path_.string());
}

VerifyResult verify_manifest_file(const std::filesystem::path& manifest_path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ManifestError(manifest_path.string() + ": " + e.what());
    }
    if (doc.value("format", std::string()) != kFormat)
        throw ManifestError(manifest_path.string() + ": not a " + std::string(kFormat) + " file");

    VerifyResult result;
    auto check = [&](const std::string& file, const std::string& expected) {
        ++result.checked;
        if (!std::filesystem::exists(file)) {
            result.ok = false;
            result.problems.push_back(file + ": missing");
            return;
        }
        const std::string actual = file_fingerprint(file);
        if (actual != expected) {
            result.ok = false;
            result.problems.push_back(file + ": fingerprint mismatch (manifest " + expected +
                                      ", file " + actual + ")");
        }
    };

    for (const auto& [file, fp] : doc.value("artifacts", nlohmann::json::object()).items())
        check(file, fp.get<std::string>());
    for (const auto& [role, entry] : doc.value("datasets", nlohmann::json::object()).items()) {
        (void)role;
        check(entry["path"].get<std::string>(), entry["fingerprint"].get<std::string>());
    }
    return result;
}

}  // namespace shroom
