#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "shroom/corpus.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"

using namespace shroom;
using namespace shroom::testsupport;
using nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunResult run_cli(const std::filesystem::path& cwd, const std::string& args) {
    const auto out_f = cwd / "_stdout.txt";
    const auto err_f = cwd / "_stderr.txt";
    const std::string cmd = "cd '" + cwd.string() + "' && '" + SHROOM_CLI_PATH + "' " + args +
                            " > '" + out_f.string() + "' 2> '" + err_f.string() + "'";
    const int rc = std::system(cmd.c_str());
    RunResult res;
    if (WIFEXITED(rc)) res.code = WEXITSTATUS(rc);
    res.out = slurp(out_f);
    res.err = slurp(err_f);
    return res;
}

// datasets, mock script and config for a small hermetic pipeline
void write_fixture(const std::filesystem::path& dir, const std::vector<std::uint64_t>& seeds = {3}) {
    SyntheticConfig gen;
    gen.count = 40;
    gen.seed = 11;
    write_dataset(make_overlap_corpus(gen), dir / "gold.json");

    gen.count = 30;
    gen.seed = 12;
    gen.tier = QualityTier::Unlabelled;
    gen.id_offset = 100;
    write_dataset(make_overlap_corpus(gen), dir / "unlabelled.json");

    gen.count = 30;
    gen.seed = 13;
    gen.tier = QualityTier::Gold;
    gen.split = Split::Val;
    gen.id_offset = 200;
    write_dataset(make_overlap_corpus(gen), dir / "val.json");

    gen.count = 20;
    gen.seed = 14;
    gen.split = Split::Test;
    gen.id_offset = 300;
    write_dataset(make_overlap_corpus(gen), dir / "test.json");

    const json script = {
        {"rules",
         {{{"contains", "Now label this case."}, {"respond", "Hallucination"}},
          {{"contains", "Rephrase the following"}, {"respond", "reworded variant text"}}}},
        {"fallback", ""}};
    std::ofstream(dir / "mock.json") << script.dump(2);

    const json config = {
        {"data",
         {{"gold", "gold.json"},
          {"rephrased", "rephrased.json"},
          {"unlabelled", "unlabelled.json"},
          {"pseudo", "pseudo.json"},
          {"val", "val.json"},
          {"test", "test.json"}}},
        {"train", {{"defaults", {{"learning_rate", 1.0}, {"epochs", 4}, {"batch_size", 8}}}}},
        {"client", {{"kind", "mock"}, {"script", "mock.json"}}},
        {"seeds", seeds},
        {"run_dir", "run"},
    };
    std::ofstream(dir / "config.json") << config.dump(2);
}

void run_pipeline(const std::filesystem::path& dir, std::uint64_t seed) {
    const std::string base = "--config config.json ";
    REQUIRE(run_cli(dir, base + "augment --mode pseudo").code == 0);
    REQUIRE(run_cli(dir, base + "augment --mode rephrase").code == 0);
    for (const char* strat : {"baseline", "crlft", "sequential"}) {
        const std::string cmd =
            base + "train --strategy " + strat + " --seed " + std::to_string(seed);
        REQUIRE(run_cli(dir, cmd).code == 0);
    }
    const std::string tag = "-seed" + std::to_string(seed) + ".json";
    REQUIRE(run_cli(dir, base + "ensemble --base run/checkpoints/baseline" + tag +
                             " --crlft run/checkpoints/crlft" + tag +
                             " --seq run/checkpoints/sequential" + tag)
                .code == 0);
    REQUIRE(run_cli(dir, base + "predict --ensemble run/checkpoints/ensemble.json" +
                             " --base run/checkpoints/baseline" + tag +
                             " --crlft run/checkpoints/crlft" + tag +
                             " --seq run/checkpoints/sequential" + tag +
                             " --data test.json --out run/predictions/test.json")
                .code == 0);
    REQUIRE(run_cli(dir, base + "evaluate --pred run/predictions/test.json --gold test.json")
                .code == 0);
}

}  // namespace

TEST_CASE("augment pseudo writes the dataset and the report") {
    TempDir tmp;
    write_fixture(tmp.path());
    const RunResult r = run_cli(tmp.path(), "--config config.json augment --mode pseudo");
    CHECK(r.code == 0);
    CHECK(r.out.find("accepted 30") != std::string::npos);

    const Dataset pl =
        load_dataset(tmp / "pseudo.json", QualityTier::PseudoLabelled, Split::Train);
    CHECK(pl.size() == 30);
    for (const Sample& s : pl.samples) CHECK(s.label == Label::Hallucination);

    const auto report = json::parse(slurp(tmp / "run/reports/augment-pseudo.json"));
    CHECK(report["accepted"] == 30);
    CHECK(report["rejected"] == 0);
}

TEST_CASE("missing input path exits 2 and names the path") {
    TempDir tmp;
    write_fixture(tmp.path());
    std::filesystem::remove(tmp / "unlabelled.json");
    const RunResult r = run_cli(tmp.path(), "--config config.json augment --mode pseudo");
    CHECK(r.code == 2);
    CHECK(r.err.find("unlabelled.json") != std::string::npos);
}

TEST_CASE("identical train invocations produce byte-identical checkpoints") {
    TempDir tmp;
    write_fixture(tmp.path());
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode pseudo").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode rephrase").code == 0);

    REQUIRE(run_cli(tmp.path(),
                    "--config config.json train --strategy crlft --seed 3 --out ck1.json")
                .code == 0);
    REQUIRE(run_cli(tmp.path(),
                    "--config config.json train --strategy crlft --seed 3 --out ck2.json")
                .code == 0);
    CHECK(slurp(tmp / "ck1.json") == slurp(tmp / "ck2.json"));
    CHECK(!slurp(tmp / "ck1.json").empty());

    REQUIRE(run_cli(tmp.path(),
                    "--config config.json train --strategy crlft --seed 4 --out ck3.json")
                .code == 0);
    CHECK(slurp(tmp / "ck1.json") != slurp(tmp / "ck3.json"));
}

TEST_CASE("crlft manifest records the default loss weights") {
    TempDir tmp;
    write_fixture(tmp.path());
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode pseudo").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode rephrase").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json train --strategy crlft --seed 3").code == 0);

    const auto manifest = json::parse(slurp(tmp / "run/manifest.json"));
    bool found = false;
    for (const auto& stage : manifest["stages"]) {
        if (stage["name"] == "train/crlft-seed3") {
            found = true;
            CHECK(stage["loss_weights"]["gold"] == 1.01);
            CHECK(stage["loss_weights"]["rephrased"] == 0.4);
            CHECK(stage["loss_weights"]["pseudo"] == 0.1);
        }
    }
    CHECK(found);
}

TEST_CASE("sequential training trace lists the stages in curriculum order") {
    TempDir tmp;
    write_fixture(tmp.path());
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode pseudo").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode rephrase").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json train --strategy sequential --seed 3")
                .code == 0);

    const auto trace = json::parse(slurp(tmp / "run/traces/sequential-seed3.json"));
    CHECK(trace["stages"] == json({"seq/pseudo", "seq/rephrased", "seq/gold"}));
}

TEST_CASE("ensemble command fits, presets, and rejects missing checkpoints") {
    TempDir tmp;
    write_fixture(tmp.path());
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode pseudo").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode rephrase").code == 0);
    for (const char* s : {"baseline", "crlft", "sequential"})
        REQUIRE(run_cli(tmp.path(), std::string("--config config.json train --strategy ") + s +
                                        " --seed 3")
                    .code == 0);

    SUBCASE("fewer than three checkpoints is a usage error") {
        const RunResult r = run_cli(
            tmp.path(),
            "--config config.json ensemble --base run/checkpoints/baseline-seed3.json");
        CHECK(r.code == 2);
    }
    SUBCASE("fitting writes the checkpoint and manifest loss") {
        const RunResult r =
            run_cli(tmp.path(),
                    "--config config.json ensemble --base run/checkpoints/baseline-seed3.json "
                    "--crlft run/checkpoints/crlft-seed3.json "
                    "--seq run/checkpoints/sequential-seed3.json");
        CHECK(r.code == 0);
        const auto ck = json::parse(slurp(tmp / "run/checkpoints/ensemble.json"));
        CHECK(ck["backend"] == "ensemble-v1");
        CHECK(ck["provenance"]["final_loss"].is_number());
        const auto manifest = json::parse(slurp(tmp / "run/manifest.json"));
        bool found = false;
        for (const auto& stage : manifest["stages"])
            if (stage["name"] == "ensemble") {
                found = true;
                CHECK(stage["triples"] == 30);
            }
        CHECK(found);
    }
    SUBCASE("the paper preset skips fitting and writes the published weights") {
        const RunResult r =
            run_cli(tmp.path(), "--config config.json ensemble --params paper --out paper.json");
        CHECK(r.code == 0);
        const auto ck = json::parse(slurp(tmp / "paper.json"));
        CHECK(ck["head"]["w"] == json({0.52, 1.7, 1.82}));
        CHECK(ck["head"]["b"] == -1.7);
    }
}

TEST_CASE("predict writes shared-task records consistent with the threshold") {
    TempDir tmp;
    write_fixture(tmp.path());
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode pseudo").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json augment --mode rephrase").code == 0);
    REQUIRE(run_cli(tmp.path(), "--config config.json train --strategy baseline --seed 3")
                .code == 0);

    const RunResult r = run_cli(
        tmp.path(),
        "--config config.json predict --checkpoint run/checkpoints/baseline-seed3.json "
        "--data test.json --out preds.json --threshold 0.5");
    CHECK(r.code == 0);

    const auto preds = json::parse(slurp(tmp / "preds.json"));
    REQUIRE(preds.size() == 20);
    for (const auto& rec : preds) {
        REQUIRE(rec.contains("label"));
        REQUIRE(rec.contains("p(hal)"));
        const double p = rec["p(hal)"].get<double>();
        CHECK(rec["label"] == (p >= 0.5 ? "Hallucination" : "Not Hallucination"));
    }

    SUBCASE("empty dataset gives an empty prediction array") {
        write_dataset(Dataset{{}, Split::Test}, tmp / "none.json");
        const RunResult r2 = run_cli(
            tmp.path(),
            "--config config.json predict --checkpoint run/checkpoints/baseline-seed3.json "
            "--data none.json --out none-preds.json");
        CHECK(r2.code == 0);
        CHECK(json::parse(slurp(tmp / "none-preds.json")) == json::array());
    }
}

TEST_CASE("evaluate scores prediction files and aggregates runs") {
    TempDir tmp;
    write_fixture(tmp.path());
    const Dataset test = load_dataset(tmp / "test.json", QualityTier::Gold, Split::Test);

    // predictions equal to the gold labels cast to 0/1
    json perfect = json::array();
    for (const Sample& s : test.samples)
        perfect.push_back(
            {{"id", s.id},
             {"label", to_string(*s.label)},
             {"p(hal)", *s.label == Label::Hallucination ? 1.0 : 0.0}});
    std::ofstream(tmp / "perfect.json") << perfect.dump();

    const RunResult r = run_cli(
        tmp.path(),
        "--config config.json evaluate --pred perfect.json --pred perfect.json --gold test.json "
        "--out report.json --method-name baseline");
    CHECK(r.code == 0);
    CHECK(r.out.find("baseline") != std::string::npos);

    const auto report = json::parse(slurp(tmp / "report.json"));
    CHECK(report["aggregate"]["f1"]["mean"] == 1.0);
    CHECK(report["aggregate"]["accuracy"]["mean"] == 1.0);
    CHECK(report["aggregate"]["recall"]["std"] == 0.0);
    CHECK(report["aggregate"]["runs"] == 2);
    CHECK(report["runs"].size() == 2);

    SUBCASE("mismatched lengths exit 2") {
        json shorter = perfect;
        shorter.erase(0);
        std::ofstream(tmp / "short.json") << shorter.dump();
        const RunResult r2 = run_cli(
            tmp.path(), "--config config.json evaluate --pred short.json --gold test.json");
        CHECK(r2.code == 2);
    }
    SUBCASE("id mismatches exit 2") {
        json wrong = perfect;
        wrong[0]["id"] = "not-a-real-id";
        std::ofstream(tmp / "wrong.json") << wrong.dump();
        const RunResult r2 = run_cli(
            tmp.path(), "--config config.json evaluate --pred wrong.json --gold test.json");
        CHECK(r2.code == 2);
    }
}

TEST_CASE("verify-manifest passes after a run and fails on corruption") {
    TempDir tmp;
    write_fixture(tmp.path());
    run_pipeline(tmp.path(), 3);

    CHECK(run_cli(tmp.path(), "--config config.json verify-manifest").code == 0);

    // corrupt one artifact
    std::ofstream(tmp / "run/checkpoints/crlft-seed3.json", std::ios::app) << " ";
    const RunResult r = run_cli(tmp.path(), "--config config.json verify-manifest");
    CHECK(r.code == 1);
    CHECK(r.out.find("crlft-seed3.json") != std::string::npos);
}

TEST_CASE("a full mock pipeline is bit-reproducible across invocations") {
    TempDir a, b;
    write_fixture(a.path());
    write_fixture(b.path());
    run_pipeline(a.path(), 3);
    run_pipeline(b.path(), 3);

    const std::vector<std::string> files = {
        "pseudo.json",
        "rephrased.json",
        "run/checkpoints/baseline-seed3.json",
        "run/checkpoints/crlft-seed3.json",
        "run/checkpoints/sequential-seed3.json",
        "run/checkpoints/ensemble.json",
        "run/traces/sequential-seed3.json",
        "run/predictions/test.json",
        "run/reports/metrics.json",
        "run/reports/augment-pseudo.json",
    };
    for (const auto& f : files) {
        INFO(f);
        const std::string fa = slurp(a / f);
        CHECK(!fa.empty());
        CHECK(fa == slurp(b / f));
    }
}
