#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "support/grad_check.hpp"

#include "alrl/errors.hpp"
#include "alrl/nn/checkpoint.hpp"
#include "alrl/nn/network.hpp"

using namespace alrl;
using namespace alrl::nn;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Tensor t(shape);
    for (auto& v : t.values()) v = d(rng);
    return t;
}

Tensor one_hot_rows(std::size_t n, std::size_t c, Rng& rng) {
    Tensor t({n, c});
    std::uniform_int_distribution<std::size_t> d(0, c - 1);
    for (std::size_t i = 0; i < n; ++i) t[i * c + d(rng)] = 1.0;
    return t;
}

void randomize(Network& net, Rng& rng) {
    initialize(net, rng);
    for (auto& l : net.layers()) {
        if (l.kind == LayerKind::batchnorm) {
            l.weight = random_tensor(l.weight.shape(), rng, 0.5, 1.5);
            l.bias = random_tensor(l.bias.shape(), rng, -0.5, 0.5);
        } else if (l.has_params()) {
            l.bias = random_tensor(l.bias.shape(), rng, -0.2, 0.2);
        }
    }
}

}  // namespace

TEST_CASE("dense identity layer passes input through") {
    Network net({Layer::dense(2, 2)}, Loss::mse);
    net.layers()[0].weight = Tensor::matrix(2, 2, {1, 0, 0, 1});
    auto out = forward(net, Tensor::matrix(1, 2, {3, 4}), Mode::eval);
    CHECK(out[0] == 3.0);
    CHECK(out[1] == 4.0);
}

TEST_CASE("leaky relu discounts negatives by its slope") {
    auto layer = Layer::dense(2, 2, Activation::leaky_relu);
    layer.leaky_slope = 0.1;
    layer.weight = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Network net({layer}, Loss::mse);
    auto out = net.predict(Tensor::matrix(1, 2, {-2, 5}));
    CHECK(out[0] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(out[1] == 5.0);
}

TEST_CASE("1x1 identity kernel reproduces the image") {
    Network net({Layer::conv2d(1, 1, 1, 1)}, Loss::mse);
    net.layers()[0].weight = Tensor({1, 1, 1, 1}, 1.0);
    Rng rng(3);
    auto img = random_tensor({2, 1, 5, 4}, rng);
    auto out = net.predict(img);
    CHECK(out == img);
}

TEST_CASE("conv2d output geometry uses valid padding") {
    Network net({Layer::conv2d(1, 64, 3, 3, Activation::relu), Layer::conv2d(64, 32, 3, 1, Activation::relu),
                 Layer::flatten(), Layer::dense(32 * 7 * 7, 24)},
                Loss::mse);
    CHECK_NOTHROW(net.validate({1, 28, 28}));
    CHECK_THROWS_AS(net.validate({1, 8, 8}), ConfigError);
}

TEST_CASE("shape mismatch is a configuration error") {
    Network net({Layer::dense(3, 2)}, Loss::mse);
    CHECK_THROWS_AS(net.predict(Tensor::matrix(1, 2, {1, 2})), ConfigError);
    CHECK_THROWS_AS(Network({Layer::dense(3, 2), Layer::dense(4, 1)}, Loss::mse), ConfigError);
}

TEST_CASE("non-finite output is a numeric error") {
    Network net({Layer::dense(1, 1)}, Loss::mse);
    net.layers()[0].weight[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(net.predict(Tensor::matrix(1, 1, {1})), NumericError);
}

TEST_CASE("hand-differentiated 1x1 dense gradient") {
    // L = 1/2 (w*x - y)^2 with w=2, x=1, y=0 -> dL/dw = (2 - 0) * 1 = 2
    Network net({Layer::dense(1, 1)}, Loss::mse);
    net.layers()[0].weight[0] = 2.0;
    auto g = backward(net, Tensor::matrix(1, 1, {1}), Tensor::matrix(1, 1, {0}));
    CHECK(g.loss == doctest::Approx(2.0));
    CHECK(g.layers[0].weight[0] == doctest::Approx(2.0));
    CHECK(g.layers[0].bias[0] == doctest::Approx(2.0));
}

TEST_CASE("gradients vanish when the target equals the prediction") {
    Rng rng(11);
    Network net({Layer::dense(4, 5, Activation::leaky_relu), Layer::dense(5, 3)}, Loss::mse);
    randomize(net, rng);
    auto x = random_tensor({6, 4}, rng);
    auto y = net.predict(x);
    auto g = backward(net, x, y);
    CHECK(g.loss == 0.0);
    for (const auto& pg : g.layers) {
        for (double v : pg.weight.values()) CHECK(v == 0.0);
        for (double v : pg.bias.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("analytic gradients match central finite differences for every layer kind") {
    Rng rng(2024);
    constexpr double kTol = 1e-4;

    SUBCASE("dense + relu/leaky + mse") {
        for (int trial = 0; trial < 5; ++trial) {
            Network net({Layer::dense(4, 6, Activation::relu), Layer::dense(6, 5, Activation::leaky_relu),
                         Layer::dense(5, 3)},
                        Loss::mse);
            randomize(net, rng);
            auto x = random_tensor({5, 4}, rng);
            auto t = random_tensor({5, 3}, rng);
            auto g = backward(net, x, t);
            auto r = alrl::testing::grad_check(net, g, x, t);
            CHECK(r.max_rel_error <= kTol);
        }
    }
    SUBCASE("masked mse regresses only the selected outputs") {
        Network net({Layer::dense(3, 4, Activation::leaky_relu), Layer::dense(4, 2)}, Loss::mse);
        randomize(net, rng);
        auto x = random_tensor({4, 3}, rng);
        auto t = random_tensor({4, 2}, rng);
        Tensor mask({4, 2});
        for (std::size_t i = 0; i < 4; ++i) mask[i * 2 + (i % 2)] = 1.0;
        auto g = backward(net, x, t, &mask);
        CHECK(alrl::testing::grad_check(net, g, x, t, &mask).max_rel_error <= kTol);
    }
    SUBCASE("softmax + cross entropy") {
        Network net({Layer::dense(5, 7, Activation::relu), Layer::dense(7, 4, Activation::softmax)},
                    Loss::cross_entropy);
        randomize(net, rng);
        auto x = random_tensor({6, 5}, rng);
        auto t = one_hot_rows(6, 4, rng);
        auto g = backward(net, x, t);
        CHECK(alrl::testing::grad_check(net, g, x, t).max_rel_error <= kTol);
    }
    SUBCASE("softmax under mse uses the full jacobian") {
        Network net({Layer::dense(3, 3, Activation::softmax)}, Loss::mse);
        randomize(net, rng);
        auto x = random_tensor({4, 3}, rng);
        auto t = random_tensor({4, 3}, rng, 0.0, 1.0);
        auto g = backward(net, x, t);
        CHECK(alrl::testing::grad_check(net, g, x, t).max_rel_error <= kTol);
    }
    SUBCASE("conv2d + flatten + dense") {
        Network net({Layer::conv2d(2, 3, 3, 2, Activation::relu), Layer::conv2d(3, 2, 2, 1, Activation::leaky_relu),
                     Layer::flatten(), Layer::dense(2 * 2 * 2, 3, Activation::softmax)},
                    Loss::cross_entropy);
        randomize(net, rng);
        auto x = random_tensor({3, 2, 7, 7}, rng);
        auto t = one_hot_rows(3, 3, rng);
        auto g = backward(net, x, t);
        auto r = alrl::testing::grad_check(net, g, x, t);
        CHECK(r.checked == net.parameter_count());
        CHECK(r.max_rel_error <= kTol);
    }
    SUBCASE("batchnorm in training mode") {
        Network net({Layer::dense(4, 5, Activation::leaky_relu), Layer::batchnorm(5),
                     Layer::dense(5, 3, Activation::leaky_relu), Layer::batchnorm(3), Layer::dense(3, 2)},
                    Loss::mse);
        randomize(net, rng);
        auto x = random_tensor({8, 4}, rng);
        auto t = random_tensor({8, 2}, rng);
        auto g = backward(net, x, t);
        CHECK(alrl::testing::grad_check(net, g, x, t).max_rel_error <= kTol);
    }
}

TEST_CASE("batchnorm uses batch statistics in training and running statistics in eval") {
    Network net({Layer::batchnorm(1)}, Loss::mse);
    auto x = Tensor::matrix(2, 1, {1.0, 3.0});
    auto train = net.forward_train(x);
    CHECK(train[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(train[1] == doctest::Approx(1.0).epsilon(1e-4));
    const auto& l = net.layers()[0];
    CHECK(l.running_mean[0] == doctest::Approx(0.01 * 2.0));
    CHECK(l.running_var[0] == doctest::Approx(0.99 + 0.01 * 1.0));
    auto eval = net.predict(x);
    CHECK(eval[0] == doctest::Approx((1.0 - 0.02) / std::sqrt(l.running_var[0] + 1e-5)));
}

TEST_CASE("forward in eval mode is deterministic") {
    Rng rng(5);
    Network net({Layer::dense(3, 4, Activation::leaky_relu), Layer::batchnorm(4), Layer::dense(4, 2)}, Loss::mse);
    randomize(net, rng);
    auto x = random_tensor({3, 3}, rng);
    CHECK(net.predict(x) == net.predict(x));
}

TEST_CASE("sgd_step arithmetic") {
    Network net({Layer::dense(1, 1)}, Loss::mse);
    GradientSet g;
    g.layers.resize(1);
    g.layers[0].weight = Tensor({1, 1}, 0.5);
    g.layers[0].bias = Tensor({1}, 0.0);

    SUBCASE("plain step") {
        net.layers()[0].weight[0] = 1.0;
        sgd_step(net, g, 0.1);
        CHECK(net.layers()[0].weight[0] == doctest::Approx(0.95).epsilon(1e-15));
    }
    SUBCASE("zero gradient without decay is a fixed point") {
        Rng rng(1);
        Network big({Layer::dense(3, 2), Layer::batchnorm(2)}, Loss::mse);
        randomize(big, rng);
        auto before = big;
        GradientSet zero;
        for (const auto& l : big.layers()) zero.layers.push_back({Tensor(l.weight.shape()), Tensor(l.bias.shape())});
        sgd_step(big, zero, 0.3);
        for (std::size_t i = 0; i < big.layers().size(); ++i) {
            CHECK(big.layers()[i].weight == before.layers()[i].weight);
            CHECK(big.layers()[i].bias == before.layers()[i].bias);
        }
    }
    SUBCASE("weight decay") {
        net.layers()[0].weight[0] = 1.0;
        net.layers()[0].l2 = 0.001;
        g.layers[0].weight[0] = 0.0;
        sgd_step(net, g, 0.1);
        CHECK(net.layers()[0].weight[0] == doctest::Approx(0.9999).epsilon(1e-15));
    }
    SUBCASE("running stats are untouched by the optimizer") {
        Network bn({Layer::batchnorm(2)}, Loss::mse);
        bn.layers()[0].running_mean = Tensor({2}, 0.7);
        GradientSet gb;
        gb.layers.push_back({Tensor({2}, 1.0), Tensor({2}, 1.0)});
        sgd_step(bn, gb, 0.5);
        CHECK(bn.layers()[0].running_mean[0] == 0.7);
        CHECK(bn.layers()[0].weight[0] == doctest::Approx(0.5));
    }
    SUBCASE("invalid inputs") {
        CHECK_THROWS_AS(sgd_step(net, g, 0.0), ConfigError);
        g.layers[0].weight[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(sgd_step(net, g, 0.1), NumericError);
    }
}

TEST_CASE("he uniform bounds and mean") {
    Rng rng(7);
    auto t = he_uniform_init({10000}, 6, rng);
    for (double v : t.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    const double mean = std::accumulate(t.values().begin(), t.values().end(), 0.0) / 10000.0;
    CHECK(std::abs(mean) < 0.02);

    auto t24 = he_uniform_init({2000}, 24, rng);
    const auto [mn, mx] = std::minmax_element(t24.values().begin(), t24.values().end());
    CHECK(*mn >= -0.5);
    CHECK(*mx <= 0.5);
    CHECK(*mx > 0.49);
    CHECK_THROWS_AS(he_uniform_init({3}, 0, rng), ConfigError);
}

TEST_CASE("softmax examples") {
    auto a = softmax(std::vector<double>{1, 1}, 1.0);
    CHECK(a[0] == doctest::Approx(0.5));
    CHECK(a[1] == doctest::Approx(0.5));

    // two-class closed form: p0 = logistic((2 - 0) / 0.2)
    const double logistic10 = 1.0 / (1.0 + std::exp(-10.0));
    auto b = softmax(std::vector<double>{2, 0}, 0.2);
    CHECK(b[0] == doctest::Approx(logistic10).epsilon(1e-12));
    CHECK(b[1] == doctest::Approx(1.0 - logistic10).epsilon(1e-9));
    CHECK(b[0] == doctest::Approx(0.9999546).epsilon(1e-7));

    auto c = softmax(std::vector<double>{1000, 0}, 1.0);
    CHECK(c[0] == 1.0);
    CHECK(c[1] == doctest::Approx(0.0));
    CHECK(std::isfinite(c[1]));

    CHECK_THROWS_AS(softmax(std::vector<double>{1, 2}, 0.0), ConfigError);
}

TEST_CASE("softmax rows are distributions for arbitrary inputs and temperatures") {
    Rng rng(99);
    std::uniform_real_distribution<double> val(-500.0, 500.0);
    std::uniform_real_distribution<double> logtau(-4.0, 3.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(2 + trial % 9);
        for (auto& x : v) x = val(rng);
        const auto p = softmax(v, std::pow(10.0, logtau(rng)));
        double sum = 0.0;
        for (double x : p) {
            CHECK(x >= 0.0);
            sum += x;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("cross entropy of a one-hot prediction is near zero") {
    auto t = Tensor::matrix(2, 3, {0, 1, 0, 1, 0, 0});
    CHECK(loss_and_grad(Loss::cross_entropy, t, t, nullptr, nullptr) == doctest::Approx(0.0));
    auto p = Tensor::matrix(1, 2, {0.0, 1.0});
    auto wrong = Tensor::matrix(1, 2, {1.0, 0.0});
    CHECK(loss_and_grad(Loss::cross_entropy, p, wrong, nullptr, nullptr) == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("checkpoint round trip preserves every parameter and statistic") {
    Rng rng(17);
    Network net({Layer::conv2d(1, 2, 2, 1, Activation::relu), Layer::flatten(), Layer::dense(8, 4, Activation::leaky_relu, 0.001),
                 Layer::batchnorm(4), Layer::dense(4, 3, Activation::softmax)},
                Loss::cross_entropy);
    randomize(net, rng);
    net.forward_train(random_tensor({4, 1, 3, 3}, rng));
    std::stringstream ss;
    write_checkpoint(ss, net, R"({"step":3})");
    auto ck = read_checkpoint(ss);
    CHECK(ck.metadata == R"({"step":3})");
    REQUIRE(ck.network.layers().size() == net.layers().size());
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& a = net.layers()[i];
        const auto& b = ck.network.layers()[i];
        CHECK(a.kind == b.kind);
        CHECK(a.activation == b.activation);
        CHECK(a.weight == b.weight);
        CHECK(a.bias == b.bias);
        CHECK(a.running_mean == b.running_mean);
        CHECK(a.running_var == b.running_var);
        CHECK(a.l2 == b.l2);
    }
    auto x = random_tensor({2, 1, 3, 3}, rng);
    CHECK(ck.network.predict(x) == net.predict(x));

    std::string bytes = ss.str();
    bytes[0] = 'X';
    std::stringstream bad(bytes);
    CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
    std::stringstream truncated(ss.str().substr(0, 40));
    CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
}
