// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "cxrfuse/errors.hpp"
#include "cxrfuse/training.hpp"
#include "support/test_support.hpp"

using namespace cxrfuse;
using cxrfuse::testing::random_record;
using cxrfuse::testing::tiny_model_config;

TEST_CASE("warmup schedule") {
    const TrainConfig cfg;
    CHECK(lr_at_step(250, cfg) == doctest::Approx(1.5e-4).epsilon(1e-15));
    CHECK(lr_at_step(500, cfg) == 3e-4);
    CHECK(lr_at_step(10000, cfg) == 3e-4);
    CHECK(lr_at_step(1, cfg) == doctest::Approx(3e-4 / 500).epsilon(1e-15));
    double prev = 0.0;
    for (std::size_t t = 1; t <= 600; ++t) {
        const double lr = lr_at_step(t, cfg);
        CHECK(lr >= prev);
        if (t >= 500) CHECK(lr == 3e-4);
        prev = lr;
    }
}

TEST_CASE("train config validation and JSON") {
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    TrainConfig cfg;
    cfg.seed = 7;
    cfg.base_lr = 1e-3;
    const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
    CHECK(back.seed == 7);
    CHECK(back.base_lr == 1e-3);
    CHECK_THROWS_AS(train_config_from_json({{"learning_rate", 1}}), ConfigError);
}

TEST_CASE("adam step cases") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        ModelParameters p;
        p.add("x", Tensor::vector({1.0, -2.0}));
        AdamState s;
        Gradients g{{"x", Tensor::zeros({2})}};
        adam_step(p, g, s, 0.1);
        CHECK(p.at("x") == Tensor::vector({1.0, -2.0}));
    }
    SUBCASE("first step moves by lr") {
        ModelParameters p;
        p.add("x", Tensor::vector({0.0}));
        AdamState s;
        adam_step(p, {{"x", Tensor::vector({1.0})}}, s, 0.01);
        CHECK(p.at("x")[0] == doctest::Approx(-0.01 / (1.0 + 1e-8)).epsilon(1e-14));
        CHECK(s.t == 1);
    }
    SUBCASE("quadratic decreases and matches a hand-written recurrence") {
        ModelParameters p;
        p.add("x", Tensor::vector({0.0}));
        AdamState s;
        const double lr = 0.1;
        double x = 0.0, m = 0.0, v = 0.0;
        double prev_loss = 9.0;
        for (int t = 1; t <= 3; ++t) {
            const double g = 2.0 * (p.at("x")[0] - 3.0);
            adam_step(p, {{"x", Tensor::vector({g})}}, s, lr);
            const double gr = 2.0 * (x - 3.0);
            m = 0.9 * m + 0.1 * gr;
            v = 0.999 * v + 0.001 * gr * gr;
            const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
            x -= lr * mh / (std::sqrt(vh) + 1e-8);
            CHECK(p.at("x")[0] == doctest::Approx(x).epsilon(1e-14));
            const double loss = (x - 3.0) * (x - 3.0);
            CHECK(loss < prev_loss);
            prev_loss = loss;
        }
    }
    SUBCASE("non-finite gradient names the parameter and changes nothing") {
        ModelParameters p;
        p.add("a", Tensor::vector({1.0}));
        p.add("layer.w", Tensor::vector({2.0}));
        AdamState s;
        Gradients g{{"a", Tensor::vector({1.0})}, {"layer.w", Tensor::vector({std::nan("")})}};
        try {
            adam_step(p, g, s, 0.1);
            FAIL("expected TrainingError");
        } catch (const TrainingError& e) {
            CHECK(std::string(e.what()).find("layer.w") != std::string::npos);
        }
        CHECK(p.at("a")[0] == 1.0);
        CHECK(s.t == 0);
    }
}

TEST_CASE("global norm clipping") {
    Gradients g{{"a", Tensor::vector({3.0})}, {"b", Tensor::vector({4.0})}};
    CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g.at("a")[0] == doctest::Approx(0.6));
    CHECK(g.at("b")[0] == doctest::Approx(0.8));
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(1.0));
    CHECK(g.at("a")[0] == doctest::Approx(0.6));
}

TEST_CASE("early stopping with patience 5") {
    EarlyStopping es(5);
    const std::vector<double> losses{1.0, 0.9, 0.91, 0.92, 0.93, 0.94, 0.95, 0.5};
    std::size_t stopped_at = 0;
    for (std::size_t i = 0; i < losses.size(); ++i)
        if (es.observe(losses[i])) {
            stopped_at = i + 1;
            break;
        }
    CHECK(stopped_at == 7);
    CHECK(es.best_epoch() == 2);
    CHECK(es.best_loss() == 0.9);

    EarlyStopping improving(5);
    for (std::size_t i = 0; i < 100; ++i) CHECK_FALSE(improving.observe(1.0 - 0.001 * static_cast<double>(i)));

    EarlyStopping flat(5);
    for (std::size_t i = 0; i < 5; ++i) CHECK_FALSE(flat.observe(1.0));
    CHECK(flat.observe(1.0));
}

TEST_CASE("split proportions") {
    SplitFractions curated;
    curated.test = 0.0;
    const SplitIndices a = split_indices(3000, curated, 1);
    CHECK(a.train.size() == 2100);
    CHECK(a.val.size() == 900);
    CHECK(a.test.empty());
    const SplitIndices b = split_indices(100, curated, 1);
    CHECK(b.train.size() == 70);
    CHECK(b.val.size() == 30);
    const SplitIndices c = split_indices(4173, SplitFractions{}, 2);
    CHECK(c.test.size() == 1173);
    CHECK(c.train.size() == 2100);
    CHECK(c.val.size() == 900);
    std::set<std::size_t> seen;
    for (const auto* part : {&c.train, &c.val, &c.test})
        for (auto i : *part) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 4173);
    CHECK(split_indices(4173, SplitFractions{}, 2).train == c.train);
    CHECK(split_indices(4173, SplitFractions{}, 3).train != c.train);
    CHECK_THROWS_AS(split_indices(2, SplitFractions{}, 1), ConfigError);
    SplitFractions bad;
    bad.train = 0.5;
    CHECK_THROWS_AS(split_indices(100, bad, 1), ConfigError);
}

TEST_CASE("fit is deterministic and keeps the best validation checkpoint") {
    ModelConfig cfg = tiny_model_config();
    Rng rng(3);
    std::vector<PatientRecord> train, val;
    for (int i = 0; i < 12; ++i) train.push_back(random_record(cfg, rng));
    for (int i = 0; i < 4; ++i) val.push_back(random_record(cfg, rng));
    TrainConfig tc;
    tc.base_lr = 5e-3;
    tc.warmup_steps = 5;
    tc.batch_size = 4;
    tc.max_epochs = 8;
    tc.seed = 11;

    ReportModel m1(cfg, 1), m2(cfg, 1);
    const FitResult r1 = fit(m1, train, val, tc);
    const FitResult r2 = fit(m2, train, val, tc);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
        CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
    }
    CHECK(r1.steps == r1.history.size() * 3);
    CHECK(evaluate_split(m1, val).loss == doctest::Approx(r1.best_val_loss).epsilon(1e-12));
    CHECK(r1.history.front().lr == doctest::Approx(5e-3 * 3.0 / 5.0));
    const std::string csv = history_csv(r1.history);
    CHECK(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc,lr\n", 0) == 0);

    CHECK_THROWS_AS(fit(m1, {}, val, tc), ConfigError);
}

TEST_CASE("a diverging run restores the last good parameters") {
    ModelConfig cfg = tiny_model_config();
    Rng rng(4);
    std::vector<PatientRecord> train, val;
    for (int i = 0; i < 4; ++i) train.push_back(random_record(cfg, rng));
    for (int i = 0; i < 2; ++i) val.push_back(random_record(cfg, rng));
    TrainConfig tc;
    tc.base_lr = 1e300;
    tc.warmup_steps = 1;
    tc.batch_size = 2;
    tc.max_epochs = 5;
    ReportModel m(cfg, 2);
    const FitResult r = fit(m, train, val, tc);
    CHECK(r.diverged);
    CHECK_FALSE(r.message.empty());
    for (const auto& [path, t] : m.parameters())
        for (double x : t.data()) CHECK(std::isfinite(x));
}
