#include <doctest.h>

#include <cmath>
#include <numeric>

#include "shroom/classifier.hpp"
#include "shroom/rng.hpp"
#include "support/oracle.hpp"
#include "support/synthetic.hpp"

using namespace shroom;
using namespace shroom::testsupport;

namespace {

std::shared_ptr<const HashedNgramEncoder> ref_encoder() {
    static auto enc = std::make_shared<HashedNgramEncoder>();
    return enc;
}

Sample pair_sample(std::string hyp, std::string tgt, std::string src = "src text") {
    Sample s;
    s.id = "0";
    s.src = std::move(src);
    s.hyp = std::move(hyp);
    s.tgt = std::move(tgt);
    s.tier = QualityTier::Unlabelled;
    return s;
}

double accuracy_of(const ClassifierModel& model, const Dataset& ds) {
    std::size_t hit = 0;
    for (const Sample& s : ds.samples) {
        const bool pred = model.predict(s) >= 0.5;
        const bool gold = *s.label == Label::Hallucination;
        hit += pred == gold;
    }
    return static_cast<double>(hit) / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("bce closed forms") {
    CHECK(bce(1.0, 1.0 - 1e-12) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(bce(1.0, 0.5) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    // entropy of Bernoulli(0.4): -(0.4 ln 0.4 + 0.6 ln 0.6)
    CHECK(bce(0.4, 0.4) == doctest::Approx(0.6730116670092565).epsilon(1e-12));
    CHECK(bce(0.4, 0.4) == doctest::Approx(0.673012).epsilon(1e-5));
}

TEST_CASE("bce domain") {
    CHECK_THROWS_AS(bce(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(bce(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(bce(-0.1, 0.5), DomainError);
    CHECK_THROWS_AS(bce(1.1, 0.5), DomainError);
}

TEST_CASE("bce is nonnegative and minimized at f = y") {
    SeededRng rng(3);
    for (int round = 0; round < 100; ++round) {
        const double y = rng.unit();
        const double f_star = std::clamp(y, 1e-6, 1.0 - 1e-6);
        const double base = bce(y, f_star);
        CHECK(base >= 0.0);
        for (int g = 1; g < 100; ++g) {
            const double f = g / 100.0;
            CHECK(bce(y, f) >= base - 1e-12);
        }
    }
}

TEST_CASE("weighted_bce frozen values with the published weights") {
    const LossWeights w;  // 1.01 / 0.4 / 0.1
    CHECK(weighted_bce(QualityTier::Gold, w, 1.0, 0.5) ==
          doctest::Approx(0.700079).epsilon(1e-6));
    CHECK(weighted_bce(QualityTier::Gold, w, 1.0, 0.5) == 1.01 * bce(1.0, 0.5));
    CHECK(weighted_bce(QualityTier::PseudoLabelled, w, 0.0, 0.5) ==
          doctest::Approx(0.069315).epsilon(1e-5));
    CHECK(weighted_bce(QualityTier::PseudoLabelled, w, 0.0, 0.5) == 0.1 * bce(0.0, 0.5));
}

TEST_CASE("weighted_bce reduction, annihilation, homogeneity, tier error") {
    SeededRng rng(11);
    const LossWeights unit{1.0, 1.0, 1.0};
    const QualityTier tiers[] = {QualityTier::Gold, QualityTier::Rephrased,
                                 QualityTier::PseudoLabelled};
    for (int i = 0; i < 2000; ++i) {
        const QualityTier tier = tiers[rng.below(3)];
        const double y = rng.unit();
        const double f = 0.001 + 0.998 * rng.unit();
        CHECK(weighted_bce(tier, unit, y, f) == bce(y, f));  // exact: 1.0 * x == x

        LossWeights scaled;
        const double c = rng.unit() * 3.0;
        scaled.gold = c * 1.01;
        scaled.rephrased = c * 0.4;
        scaled.pseudo = c * 0.1;
        const LossWeights base;
        CHECK(weighted_bce(tier, scaled, y, f) ==
              doctest::Approx(c * weighted_bce(tier, base, y, f)).epsilon(1e-12));
    }
    const LossWeights zeroed{0.0, 0.0, 0.0};
    CHECK(weighted_bce(QualityTier::Gold, zeroed, 0.7, 0.3) == 0.0);
    CHECK_THROWS_AS(weighted_bce(QualityTier::Unlabelled, unit, 0.5, 0.5), TierError);
}

TEST_CASE("loss weight ordering is a warning, not an error") {
    CHECK_FALSE(LossWeights{1.01, 0.4, 0.1}.ordering_warning().has_value());
    CHECK(LossWeights{0.1, 0.4, 1.01}.ordering_warning().has_value());
    CHECK(LossWeights{1.0, 1.0, 1.0}.ordering_warning().has_value());
}

TEST_CASE("hashed n-gram encoder shape and determinism") {
    const auto enc = ref_encoder();
    CHECK(enc->dim() == 2048);
    const auto a = enc->encode("alpha beta gamma", "alpha beta delta");
    const auto b = enc->encode("alpha beta gamma", "alpha beta delta");
    CHECK(a == b);
    CHECK(a.size() == 2048);

    // any byte string is accepted, including malformed UTF-8
    const std::string bad = "ok\xFF\xC0 text";
    CHECK_NOTHROW(enc->encode(bad, "Харальд Синезубый"));

    // empty text encodes to an all-zero profile
    const auto zero = enc->text_profile("");
    CHECK(std::count(zero.begin(), zero.end(), 0.0) == static_cast<long>(zero.size()));

    CHECK_THROWS_AS(HashedNgramEncoder(6), ConfigError);
    CHECK_THROWS_AS(HashedNgramEncoder(0), ConfigError);
}

TEST_CASE("similar pairs score higher overlap blocks than unrelated pairs") {
    const auto enc = ref_encoder();
    const std::size_t block = enc->dim() / 4;
    auto product_mass = [&](const std::string& a, const std::string& b) {
        const auto v = enc->encode(a, b);
        return std::accumulate(v.begin() + 2 * block, v.begin() + 3 * block, 0.0);
    };
    CHECK(product_mass("the king introduced christianity", "the king introduced christianity") >
          product_mass("the king introduced christianity", "unrelated words entirely different"));
}

TEST_CASE("predict: zero head gives exactly 0.5, fixed model is deterministic") {
    ClassifierModel model(ref_encoder());
    const Sample s = pair_sample("hyp text", "tgt text");
    CHECK(model.predict(s) == 0.5);

    SeededRng rng(21);
    for (double& w : model.head().w) w = rng.uniform(-0.1, 0.1);
    model.head().b = 0.05;
    const double p1 = model.predict(s);
    const double p2 = model.predict(s);
    CHECK(p1 == p2);
    CHECK(p1 > 0.0);
    CHECK(p1 < 1.0);
}

TEST_CASE("predict requires a non-empty hyp") {
    ClassifierModel model(ref_encoder());
    CHECK_THROWS_AS(model.predict(pair_sample("", "tgt")), InvariantError);
}

TEST_CASE("pairing rule: premise is tgt unless blank, then src") {
    ClassifierModel model(ref_encoder());
    SeededRng rng(4);
    for (double& w : model.head().w) w = rng.uniform(-0.3, 0.3);

    const Sample with_tgt_a = pair_sample("hyp", "shared target", "source one");
    const Sample with_tgt_b = pair_sample("hyp", "shared target", "source two");
    CHECK(model.predict(with_tgt_a) == model.predict(with_tgt_b));  // src ignored

    const Sample no_tgt_a = pair_sample("hyp", "  ", "source one");
    const Sample no_tgt_b = pair_sample("hyp", "  ", "source two");
    CHECK(model.predict(no_tgt_a) != model.predict(no_tgt_b));  // src now matters

    model.set_pairing(PairingRule::SourceAlways);
    const Sample src_a = pair_sample("hyp", "shared target", "source one");
    const Sample src_b = pair_sample("hyp", "shared target", "source two");
    CHECK(model.predict(src_a) != model.predict(src_b));
}

TEST_CASE("analytic head gradient matches central finite differences") {
    SeededRng rng(31);
    SyntheticConfig gen;
    gen.count = 24;
    gen.seed = 77;
    const Dataset data = make_overlap_corpus(gen);

    ClassifierModel model(ref_encoder());
    auto items = detail::make_items(model, data, 1.0);
    // mixed weights to exercise the weighted path
    for (std::size_t i = 0; i < items.size(); ++i) items[i].weight = 0.1 + 0.3 * (i % 4);

    for (int trial = 0; trial < 10; ++trial) {
        HeadParams head;
        head.w.assign(model.encoder().dim(), 0.0);
        for (double& w : head.w) w = rng.uniform(-0.5, 0.5);
        head.b = rng.uniform(-0.5, 0.5);

        std::vector<std::size_t> batch(items.size());
        std::iota(batch.begin(), batch.end(), std::size_t{0});
        const auto lg = detail::head_loss_grad(items, batch, head, -15.0, 15.0);

        // probe a handful of coordinates plus the bias
        std::vector<double> analytic, numeric;
        const double h = 1e-6;
        for (int probe = 0; probe < 6; ++probe) {
            const std::size_t k = rng.below(head.w.size());
            analytic.push_back(lg.grad_w[k]);
            HeadParams hp = head;
            auto loss_at = [&](double v) {
                hp.w[k] = v;
                return detail::head_loss_grad(items, batch, hp, -15.0, 15.0).loss;
            };
            numeric.push_back(central_diff(loss_at, head.w[k], h));
            hp.w[k] = head.w[k];
        }
        analytic.push_back(lg.grad_b);
        HeadParams hp = head;
        auto loss_at_b = [&](double v) {
            hp.b = v;
            return detail::head_loss_grad(items, batch, hp, -15.0, 15.0).loss;
        };
        numeric.push_back(central_diff(loss_at_b, head.b, h));

        CHECK(relative_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("train_baseline: zero epochs is a no-op; trace has one entry per epoch") {
    SyntheticConfig gen;
    gen.count = 40;
    const Dataset gold = make_overlap_corpus(gen);

    ClassifierModel model(ref_encoder());
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto before = model.head();
    const TrainingTrace trace = train_baseline(model, gold, cfg);
    CHECK(model.head() == before);
    CHECK(trace.stages == std::vector<std::string>{"baseline"});
    CHECK(trace.entries.empty());

    cfg.epochs = 5;
    const TrainingTrace t2 = train_baseline(model, gold, cfg);
    CHECK(t2.entries.size() == 5);
    for (const auto& e : t2.entries) {
        CHECK(e.stage == "baseline");
        CHECK(std::isfinite(e.mean_loss));
    }
}

TEST_CASE("train_baseline validates config, tier and p(hal)") {
    SyntheticConfig gen;
    gen.count = 8;
    const Dataset gold = make_overlap_corpus(gen);
    ClassifierModel model(ref_encoder());

    TrainConfig bad;
    bad.learning_rate = -1.0;
    CHECK_THROWS_AS(train_baseline(model, gold, bad), ConfigError);

    gen.tier = QualityTier::PseudoLabelled;
    const Dataset pseudo = make_overlap_corpus(gen);
    CHECK_THROWS_AS(train_baseline(model, pseudo, TrainConfig{}), TierError);

    Dataset crafted = gold;
    crafted.samples[0].p_hal.reset();  // invalid gold, but train must fail loudly
    CHECK_THROWS_AS(train_baseline(model, crafted, TrainConfig{}), SchemaError);

    gen.tier = QualityTier::Unlabelled;
    const Dataset unlabelled = make_overlap_corpus(gen);
    CHECK_THROWS_AS(train_crlft(model, gold, unlabelled, pseudo, TrainConfig{}), TierError);
}

TEST_CASE("training fits the separable synthetic corpus") {
    SyntheticConfig gen;
    gen.count = 2000;
    gen.seed = 100;
    const Dataset corpus = make_overlap_corpus(gen);

    ClassifierModel model(ref_encoder());
    TrainConfig cfg;
    cfg.learning_rate = 2.0;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.seed = 1;
    train_baseline(model, corpus, cfg);

    CHECK(accuracy_of(model, corpus) >= 0.95);

    // held-out hallucinated pair scores above 0.5
    SyntheticConfig held;
    held.count = 50;
    held.seed = 555;
    held.positive_rate = 1.0;
    const Dataset hal = make_overlap_corpus(held);
    double mean = 0.0;
    for (const Sample& s : hal.samples) mean += model.predict(s);
    mean /= static_cast<double>(hal.size());
    CHECK(mean > 0.5);
    CHECK(token_overlap(hal.samples[0].hyp, hal.samples[0].tgt) < 0.3);
}

TEST_CASE("identical (datasets, cfg, seed) give identical final parameters") {
    SyntheticConfig gen;
    gen.count = 120;
    const Dataset gold = make_overlap_corpus(gen);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.seed = 9;

    ClassifierModel a(ref_encoder()), b(ref_encoder());
    train_baseline(a, gold, cfg);
    train_baseline(b, gold, cfg);
    CHECK(a.head() == b.head());

    cfg.seed = 10;
    ClassifierModel c(ref_encoder());
    train_baseline(c, gold, cfg);
    CHECK(a.head().w != c.head().w);  // different shuffle order actually changes the path
}

TEST_CASE("train_crlft with unit weights equals plain training on the union") {
    SyntheticConfig gen;
    gen.count = 60;
    gen.seed = 13;
    Dataset gold = make_overlap_corpus(gen);
    gen.tier = QualityTier::Rephrased;
    gen.seed = 14;
    gen.id_offset = 100;
    Dataset rephr = make_overlap_corpus(gen);
    gen.tier = QualityTier::PseudoLabelled;
    gen.seed = 15;
    gen.id_offset = 200;
    Dataset pseudo = make_overlap_corpus(gen);

    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 2;
    cfg.loss_weights = LossWeights{1.0, 1.0, 1.0};

    ClassifierModel weighted(ref_encoder());
    const TrainingTrace wt = train_crlft(weighted, gold, rephr, pseudo, cfg);

    ClassifierModel plain(ref_encoder());
    std::vector<detail::TrainItem> items;
    for (const Dataset* d : {&gold, &rephr, &pseudo}) {
        auto part = detail::make_items(plain, *d, 1.0);
        std::move(part.begin(), part.end(), std::back_inserter(items));
    }
    TrainingTrace pt;
    detail::run_phase(plain, items, cfg, cfg.epochs, "crlft", pt);

    REQUIRE(wt.entries.size() == pt.entries.size());
    for (std::size_t i = 0; i < wt.entries.size(); ++i)
        CHECK(wt.entries[i].mean_loss == pt.entries[i].mean_loss);  // bit-for-bit
    CHECK(weighted.head() == plain.head());
}

TEST_CASE("zero-weight samples contribute nothing to loss or gradients") {
    SyntheticConfig gen;
    gen.count = 40;
    gen.seed = 23;
    Dataset gold = make_overlap_corpus(gen);
    gen.tier = QualityTier::Rephrased;
    gen.seed = 24;
    gen.id_offset = 100;
    Dataset rephr = make_overlap_corpus(gen);
    gen.tier = QualityTier::PseudoLabelled;
    gen.seed = 25;
    gen.id_offset = 200;
    Dataset pseudo = make_overlap_corpus(gen);

    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 5;
    cfg.batch_size = 16;
    cfg.loss_weights = LossWeights{1.01, 0.4, 0.0};

    ClassifierModel full(ref_encoder());
    train_crlft(full, gold, rephr, pseudo, cfg);

    // replica of the phase loop that skips zero-weight items but keeps each
    // batch's denominator, i.e. the same batch composition contract
    ClassifierModel skip(ref_encoder());
    std::vector<detail::TrainItem> items;
    auto add = [&](const Dataset& d, double w) {
        auto part = detail::make_items(skip, d, w);
        std::move(part.begin(), part.end(), std::back_inserter(items));
    };
    add(gold, 1.01);
    add(rephr, 0.4);
    add(pseudo, 0.0);

    SeededRng rng(cfg.seed);
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto sigmoid = [](double z) {
        return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    };
    HeadParams& head = skip.head();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const double inv_n = 1.0 / static_cast<double>(end - start);
            std::vector<double> grad_w(head.w.size(), 0.0);
            double grad_b = 0.0;
            for (std::size_t j = start; j < end; ++j) {
                const auto& it = items[order[j]];
                if (it.weight == 0.0) continue;  // dropped, denominator unchanged
                double z = head.b;
                for (std::size_t i = 0; i < it.features.size(); ++i)
                    z += head.w[i] * it.features[i];
                z = std::clamp(z, -15.0, 15.0);
                const double g = inv_n * it.weight * (sigmoid(z) - it.target);
                for (std::size_t i = 0; i < it.features.size(); ++i)
                    grad_w[i] += g * it.features[i];
                grad_b += g;
            }
            for (std::size_t i = 0; i < head.w.size(); ++i)
                head.w[i] -= cfg.learning_rate * grad_w[i];
            head.b -= cfg.learning_rate * grad_b;
        }
    }
    CHECK(full.head() == skip.head());  // bitwise
}

TEST_CASE("train_sequential: stage order, degenerate curriculum, single stage") {
    SyntheticConfig gen;
    gen.count = 50;
    gen.seed = 41;
    Dataset gold = make_overlap_corpus(gen);
    gen.tier = QualityTier::Rephrased;
    gen.seed = 42;
    gen.id_offset = 100;
    Dataset rephr = make_overlap_corpus(gen);
    gen.tier = QualityTier::PseudoLabelled;
    gen.seed = 43;
    gen.id_offset = 200;
    Dataset pseudo = make_overlap_corpus(gen);

    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 8;

    SUBCASE("stage order is exactly pseudo, rephrased, gold") {
        ClassifierModel model(ref_encoder());
        const TrainingTrace trace = train_sequential(model, pseudo, rephr, gold, cfg);
        CHECK(trace.stages ==
              std::vector<std::string>{"seq/pseudo", "seq/rephrased", "seq/gold"});
        // entries appear grouped in execution order
        std::vector<std::string> seen;
        for (const auto& e : trace.entries)
            if (seen.empty() || seen.back() != e.stage) seen.push_back(e.stage);
        CHECK(seen == trace.stages);
    }

    SUBCASE("empty first two stages reduce to baseline training") {
        const Dataset empty_pl{{}, Split::Train};
        const Dataset empty_r{{}, Split::Train};
        ClassifierModel seq_model(ref_encoder());
        train_sequential(seq_model, empty_pl, empty_r, gold, cfg);

        ClassifierModel base_model(ref_encoder());
        train_baseline(base_model, gold, cfg);
        CHECK(seq_model.head() == base_model.head());
    }

    SUBCASE("a single populated stage equals plain training on that stage") {
        const Dataset empty_r{{}, Split::Train};
        const Dataset empty_g{{}, Split::Train};
        ClassifierModel seq_model(ref_encoder());
        train_sequential(seq_model, pseudo, empty_r, empty_g, cfg);

        ClassifierModel plain(ref_encoder());
        auto items = detail::make_items(plain, pseudo, 1.0);
        TrainingTrace t;
        detail::run_phase(plain, items, cfg, cfg.epochs, "seq/pseudo", t);
        CHECK(seq_model.head() == plain.head());
    }

    SUBCASE("per-stage epoch overrides") {
        cfg.stage_epochs.pseudo = 1;
        cfg.stage_epochs.rephrased = 0;
        ClassifierModel model(ref_encoder());
        const TrainingTrace trace = train_sequential(model, pseudo, rephr, gold, cfg);
        int pl = 0, re = 0, go = 0;
        for (const auto& e : trace.entries) {
            pl += e.stage == "seq/pseudo";
            re += e.stage == "seq/rephrased";
            go += e.stage == "seq/gold";
        }
        CHECK(pl == 1);
        CHECK(re == 0);
        CHECK(go == cfg.epochs);
    }

    SUBCASE("unlabelled data is rejected, not skipped") {
        gen.tier = QualityTier::Unlabelled;
        gen.id_offset = 300;
        const Dataset unl = make_overlap_corpus(gen);
        ClassifierModel model(ref_encoder());
        CHECK_THROWS_AS(train_sequential(model, unl, rephr, gold, cfg), TierError);
    }
}
