#include <algorithm>
#include <filesystem>
#include <numeric>

#include "doctest.h"

#include "alrl/classifier/ic_model.hpp"
#include "alrl/errors.hpp"

using namespace alrl;
using namespace alrl::classifier;

namespace {

data::SyntheticSpec two_class_spec(std::uint64_t seed) {
    data::SyntheticSpec spec;
    spec.classes = 2;
    spec.samples = 200;
    spec.styles_per_class = 1;
    spec.pixel_noise = 10.0;
    spec.seed = seed;
    return spec;
}

}  // namespace

TEST_CASE("early stopping keeps the epoch before the first non-decrease") {
    EarlyStopping s(1);
    CHECK(s.observe(0.9));
    CHECK(s.observe(0.8));
    CHECK_FALSE(s.observe(0.85));
    CHECK(s.stopped());
    CHECK(s.epochs_seen() == 3);
    CHECK(s.best_epoch() == 2);

    EarlyStopping equal(1);
    equal.observe(0.5);
    CHECK_FALSE(equal.observe(0.5));

    EarlyStopping mono(1);
    for (int e = 0; e < 50; ++e) CHECK(mono.observe(1.0 - 0.01 * e));
    CHECK_FALSE(mono.stopped());
    CHECK(mono.best_epoch() == 50);

    EarlyStopping patient(2);
    CHECK(patient.observe(1.0));
    CHECK(patient.observe(1.1));
    CHECK_FALSE(patient.observe(1.2));
    CHECK(patient.best_epoch() == 1);
}

TEST_CASE("default architecture composes for MNIST and the halved one for 12x12") {
    CHECK_NOTHROW(ICModel(ICModelConfig{}, {1, 28, 28}, 10));
    CHECK_NOTHROW(ICModel(ICModelConfig::halved(), {1, 12, 12}, 10));
    CHECK_THROWS_AS(ICModel(ICModelConfig{}, {1, 8, 8}, 10), ConfigError);
    auto h = ICModelConfig::halved();
    CHECK(h.conv1_filters == 32);
    CHECK(h.conv2_filters == 16);
    CHECK(h.dense_units == 12);
}

TEST_CASE("predictions are probability rows") {
    Rng rng(4);
    ICModel model(ICModelConfig::halved(), {1, 12, 12}, 10);
    model.reinitialize(rng);
    auto ds = data::generate_synthetic({});
    auto p = model.predict_proba(ds.images);
    CHECK(p.shape() == nn::Shape{ds.size(), 10});
    for (std::size_t i = 0; i < p.dim(0); ++i) {
        double sum = 0.0;
        for (double v : p.row(i)) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("fit learns a separable two-class problem") {
    auto ds = std::make_shared<const data::Dataset>(data::generate_synthetic(two_class_spec(1)));
    auto val = data::generate_synthetic(two_class_spec(2));
    Rng rng(5);
    ICModelConfig cfg = ICModelConfig::halved();
    cfg.patience = 3;
    ICModel model(cfg, ds->sample_shape(), 2);
    model.reinitialize(rng);
    data::DataPool pool(ds);
    for (data::Id id = 0; id < ds->size(); ++id) pool.label(id);
    auto report = fit(model, pool, val, rng);
    CHECK(report.epochs_run >= 1);
    CHECK(report.epochs_run <= cfg.max_epochs);
    const auto pred = model.predict(ds->images);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds->labels[i];
    CHECK(static_cast<double>(correct) / static_cast<double>(pred.size()) >= 0.95);
}

TEST_CASE("fit restores the parameters of the kept epoch and never exceeds max_epochs") {
    data::SyntheticSpec spec;
    spec.samples = 120;
    auto ds = std::make_shared<const data::Dataset>(data::generate_synthetic(spec));
    spec.seed = 9;
    auto val = data::generate_synthetic(spec);
    Rng rng(12);
    for (int trial = 0; trial < 4; ++trial) {
        ICModelConfig cfg = ICModelConfig::halved();
        cfg.max_epochs = 8;
        ICModel model(cfg, ds->sample_shape(), 10);
        model.reinitialize(rng);
        data::DataPool pool(ds);
        data::build_seed_set(pool, 3, rng);
        const auto params_before = model.network().parameter_count();
        auto report = fit(model, pool, val, rng);
        CHECK(report.epochs_run <= 8);
        CHECK(model.network().parameter_count() == params_before);
        REQUIRE(report.kept_epoch >= 1);
        CHECK(model.loss(val) == doctest::Approx(report.val_losses[static_cast<std::size_t>(report.kept_epoch - 1)]));
        if (report.stopped_early) {
            CHECK(report.val_losses.back() >= report.val_losses[report.val_losses.size() - 2]);
        }
    }
}

TEST_CASE("fit on an empty labeled set is a configuration error") {
    auto ds = std::make_shared<const data::Dataset>(data::generate_synthetic({}));
    ICModel model(ICModelConfig::halved(), ds->sample_shape(), 10);
    data::DataPool pool(ds);
    Rng rng(1);
    CHECK_THROWS_AS(fit(model, pool, *ds, rng), ConfigError);
}

TEST_CASE("macro F1 on hand confusion matrices") {
    const std::vector<int> truth = {0, 1, 2, 0, 1, 2};
    CHECK(macro_f1(truth, truth, 3) == 1.0);

    // class 0 predicted everywhere: P0 = 1/2, R0 = 1 -> F1_0 = 2/3; class 1 never predicted -> 0
    const std::vector<int> t2 = {0, 0, 1, 1};
    const std::vector<int> p2 = {0, 0, 0, 0};
    CHECK(macro_f1(p2, t2, 2) == doctest::Approx((2.0 / 3.0 + 0.0) / 2.0));

    // a class absent from both truth and predictions still counts as 0
    CHECK(macro_f1(t2, t2, 3) == doctest::Approx(2.0 / 3.0));
    CHECK_THROWS_AS(macro_f1(std::vector<int>{}, std::vector<int>{}, 2), ConfigError);
}

TEST_CASE("uniform random predictor on balanced classes scores about 1/C") {
    Rng rng(77);
    std::uniform_int_distribution<int> d(0, 9);
    double acc = 0.0;
    constexpr int kTrials = 20;
    for (int t = 0; t < kTrials; ++t) {
        std::vector<int> truth(1000), pred(1000);
        for (int i = 0; i < 1000; ++i) {
            truth[static_cast<std::size_t>(i)] = i % 10;
            pred[static_cast<std::size_t>(i)] = d(rng);
        }
        const double f = macro_f1(pred, truth, 10);
        CHECK(std::abs(f - 0.1) <= 0.03);
        acc += f;
    }
    CHECK(std::abs(acc / kTrials - 0.1) <= 0.01);
}

TEST_CASE("macro F1 is in [0,1] and invariant under consistent relabeling") {
    Rng rng(3);
    std::uniform_int_distribution<int> d(0, 4);
    for (int t = 0; t < 200; ++t) {
        std::vector<int> truth(50), pred(50);
        for (auto& v : truth) v = d(rng);
        for (auto& v : pred) v = d(rng);
        std::vector<int> perm(5);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto tp = truth, pp = pred;
        for (auto& v : tp) v = perm[static_cast<std::size_t>(v)];
        for (auto& v : pp) v = perm[static_cast<std::size_t>(v)];
        const double a = macro_f1(pred, truth, 5);
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        CHECK(macro_f1(pp, tp, 5) == doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("F1 tracker moving average") {
    F1Tracker first;
    CHECK(first.update(0.4) == 0.4);

    F1Tracker t;
    t.update(0.5);
    CHECK(t.update(0.9) == doctest::Approx(0.62).epsilon(1e-15));

    F1Tracker c;
    c.update(0.1);
    for (int i = 0; i < 200; ++i) c.update(0.8);
    CHECK(c.current() == doctest::Approx(0.8).epsilon(1e-12));

    Rng rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    F1Tracker r;
    for (int i = 0; i < 500; ++i) {
        const double prev = r.initialized() ? r.current() : -1.0;
        const double raw = u(rng);
        const double now = r.update(raw);
        if (prev >= 0.0) {
            CHECK(now >= std::min(prev, raw) - 1e-15);
            CHECK(now <= std::max(prev, raw) + 1e-15);
        }
    }
}

TEST_CASE("model metrics are 24 layer statistics in fixed order") {
    ICModel model(ICModelConfig{}, {1, 28, 28}, 10);
    auto zeros = extract_metrics(model);
    CHECK(zeros.size() == 24);
    for (double v : zeros) CHECK(v == 0.0);

    model.network().layers()[0].weight.fill(1.0);
    CHECK(model.network().layers()[0].weight.size() == 576);
    auto m = extract_metrics(model);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 0.0);
    CHECK(m[2] == doctest::Approx(24.0).epsilon(1e-15));
    for (std::size_t i = 3; i < 24; ++i) CHECK(m[i] == 0.0);

    // out.b is the last tensor
    model.network().layers().back().bias[0] = 3.0;
    auto m2 = extract_metrics(model);
    CHECK(m2[21] == doctest::Approx(0.3));
    CHECK(m2[22] == doctest::Approx(0.9));
    CHECK(m2[23] == doctest::Approx(3.0));
}

TEST_CASE("classifier checkpoint round trip") {
    Rng rng(8);
    ICModel model(ICModelConfig::halved(), {1, 12, 12}, 10);
    model.reinitialize(rng);
    const auto path = std::filesystem::temp_directory_path() / "alrl_test_ic_model.bin";
    save_model(path, model);
    auto loaded = load_model(path);
    std::filesystem::remove(path);
    auto ds = data::generate_synthetic({});
    CHECK(loaded.predict_proba(ds.images) == model.predict_proba(ds.images));
    CHECK(loaded.config().conv1_filters == 32);
}
