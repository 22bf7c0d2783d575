#include "shroom/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace shroom {

namespace {

using nlohmann::json;

bool is_schema_key(const std::string& k) {
    return k == "src" || k == "hyp" || k == "tgt" || k == "task" || k == "label" || k == "p(hal)";
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

const std::string& need_string(const json& rec, const char* key, const std::string& where) {
    auto it = rec.find(key);
    if (it == rec.end())
        throw SchemaError(where + ": missing required field \"" + key + "\"");
    if (!it->is_string())
        throw SchemaError(where + ": field \"" + key + "\" must be a string");
    return it->get_ref<const std::string&>();
}

}  // namespace

const char* to_string(Task t) {
    switch (t) {
        case Task::DM: return "DM";
        case Task::MT: return "MT";
        case Task::PG: return "PG";
    }
    return "?";
}

const char* to_string(Label l) {
    return l == Label::Hallucination ? "Hallucination" : "Not Hallucination";
}

const char* to_string(QualityTier t) {
    switch (t) {
        case QualityTier::Gold: return "gold";
        case QualityTier::Rephrased: return "rephrased";
        case QualityTier::PseudoLabelled: return "pseudo";
        case QualityTier::Unlabelled: return "unlabelled";
    }
    return "?";
}

const char* to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

std::optional<Task> try_task_from_string(const std::string& s) {
    if (s == "DM") return Task::DM;
    if (s == "MT") return Task::MT;
    if (s == "PG") return Task::PG;
    return std::nullopt;
}

std::optional<Label> try_label_from_string(const std::string& s) {
    if (s == "Hallucination") return Label::Hallucination;
    if (s == "Not Hallucination") return Label::NotHallucination;
    return std::nullopt;
}

std::optional<QualityTier> try_tier_from_string(const std::string& s) {
    if (s == "gold") return QualityTier::Gold;
    if (s == "rephrased") return QualityTier::Rephrased;
    if (s == "pseudo") return QualityTier::PseudoLabelled;
    if (s == "unlabelled") return QualityTier::Unlabelled;
    return std::nullopt;
}

Task task_from_string(const std::string& s) {
    if (auto t = try_task_from_string(s)) return *t;
    throw SchemaError("unknown task \"" + s + "\" (expected DM, MT or PG)");
}

Label label_from_string(const std::string& s) {
    if (auto l = try_label_from_string(s)) return *l;
    throw SchemaError("unknown label \"" + s + "\" (expected \"Hallucination\" or \"Not Hallucination\")");
}

QualityTier tier_from_string(const std::string& s) {
    if (auto t = try_tier_from_string(s)) return *t;
    throw SchemaError("unknown tier \"" + s + "\" (expected gold, rephrased, pseudo or unlabelled)");
}

Label derive_label(double p_hal) {
    if (!(p_hal >= 0.0 && p_hal <= 1.0))
        throw DomainError("p(hal) must lie in [0, 1], got " + fmt_double(p_hal));
    return p_hal >= 0.5 ? Label::Hallucination : Label::NotHallucination;
}

void validate_sample(const Sample& s, const std::string& where) {
    if (s.p_hal && !(*s.p_hal >= 0.0 && *s.p_hal <= 1.0))
        throw InvariantError(where + ": p(hal) out of range [0, 1]: " + fmt_double(*s.p_hal));

    switch (s.tier) {
        case QualityTier::Gold:
        case QualityTier::Rephrased:
            if (!s.label || !s.p_hal)
                throw SchemaError(where + ": tier " + to_string(s.tier) +
                                  " requires both \"label\" and \"p(hal)\"");
            break;
        case QualityTier::PseudoLabelled:
            if (!s.label)
                throw SchemaError(where + ": tier pseudo requires \"label\"");
            break;
        case QualityTier::Unlabelled:
            if (s.label || s.p_hal)
                throw SchemaError(where + ": unlabelled record must not carry \"label\" or \"p(hal)\"");
            break;
    }

    if (s.label && s.p_hal && *s.label != derive_label(*s.p_hal))
        throw InvariantError(where + ": label \"" + to_string(*s.label) +
                             "\" disagrees with p(hal)=" + fmt_double(*s.p_hal));

    if (!s.extras.is_object())
        throw InvariantError(where + ": extras must be a JSON object");
    for (const auto& item : s.extras.items()) {
        if (is_schema_key(item.key()))
            throw InvariantError(where + ": extras shadow schema key \"" + item.key() + "\"");
    }
}

Dataset load_dataset(const std::filesystem::path& path, QualityTier tier, Split split_tag) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path.string());

    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    if (!doc.is_array())
        throw ParseError(path.string() + ": top-level value must be an array of records");

    Dataset ds;
    ds.split_tag = split_tag;
    ds.samples.reserve(doc.size());

    for (std::size_t i = 0; i < doc.size(); ++i) {
        const std::string where = path.string() + " record " + std::to_string(i);
        const json& rec = doc[i];
        if (!rec.is_object())
            throw ParseError(where + ": record is not an object");

        Sample s;
        s.id = std::to_string(i);
        s.tier = tier;
        s.src = need_string(rec, "src", where);
        s.hyp = need_string(rec, "hyp", where);
        s.tgt = need_string(rec, "tgt", where);

        const std::string& task_str = need_string(rec, "task", where);
        if (auto t = try_task_from_string(task_str))
            s.task = *t;
        else
            throw SchemaError(where + ": unknown task \"" + task_str + "\"");

        if (auto it = rec.find("label"); it != rec.end()) {
            if (!it->is_string())
                throw SchemaError(where + ": field \"label\" must be a string");
            auto l = try_label_from_string(it->get_ref<const std::string&>());
            if (!l)
                throw SchemaError(where + ": unknown label \"" + it->get<std::string>() + "\"");
            s.label = *l;
        }
        if (auto it = rec.find("p(hal)"); it != rec.end()) {
            if (!it->is_number())
                throw SchemaError(where + ": field \"p(hal)\" must be a number");
            s.p_hal = it->get<double>();
        }

        for (const auto& item : rec.items()) {
            if (!is_schema_key(item.key()))
                s.extras[item.key()] = item.value();
        }

        validate_sample(s, where);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    std::unordered_set<std::string> ids;
    json doc = json::array();
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Sample& s = dataset.samples[i];
        const std::string where = "record " + std::to_string(i);
        validate_sample(s, where);
        if (!ids.insert(s.id).second)
            throw InvariantError(where + ": duplicate sample id \"" + s.id + "\"");

        json rec;
        rec["src"] = s.src;
        rec["hyp"] = s.hyp;
        rec["tgt"] = s.tgt;
        rec["task"] = to_string(s.task);
        if (s.label) rec["label"] = to_string(*s.label);
        if (s.p_hal) rec["p(hal)"] = *s.p_hal;
        for (const auto& item : s.extras.items()) rec[item.key()] = item.value();
        doc.push_back(std::move(rec));
    }

    std::error_code ec;
    const auto parent = path.parent_path();
    if (!parent.empty()) {
        std::filesystem::create_directories(parent, ec);
        if (ec)
            throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out)
        throw IoError("failed writing " + path.string());
}

}  // namespace shroom
