#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "support/toy_mdp.hpp"

#include "alrl/errors.hpp"

using namespace alrl;
using namespace alrl::agent;

namespace {

/// Single linear layer whose outputs ignore the input and equal `q`.
Agent constant_q_agent(const std::vector<double>& q, std::size_t state_dim = 2) {
    AgentConfig cfg;
    cfg.hidden = {};
    cfg.batchnorm = false;
    Agent a(build_q_network(state_dim, q.size(), cfg), cfg);
    a.primary().layers()[0].weight.fill(0.0);
    for (std::size_t i = 0; i < q.size(); ++i) a.primary().layers()[0].bias[i] = q[i];
    return a;
}

bool same_params(const nn::Network& a, const nn::Network& b) {
    for (std::size_t i = 0; i < a.layers().size(); ++i) {
        const auto& x = a.layers()[i];
        const auto& y = b.layers()[i];
        if (!(x.weight == y.weight && x.bias == y.bias && x.running_mean == y.running_mean &&
              x.running_var == y.running_var)) {
            return false;
        }
    }
    return true;
}

Transition make_transition(double tag, std::size_t dim = 4) {
    return {std::vector<double>(dim, tag), 0, tag, std::vector<double>(dim, -tag), false};
}

}  // namespace

TEST_CASE("Q-network layout per agent size") {
    Rng rng(1);
    Agent small(27, 2, AgentConfig::small(), rng);
    const auto& l = small.primary().layers();
    REQUIRE(l.size() == 5);
    CHECK(l[0].kind == nn::LayerKind::dense);
    CHECK(l[0].weight.shape() == nn::Shape{24, 27});
    CHECK(l[0].activation == nn::Activation::leaky_relu);
    CHECK(l[1].kind == nn::LayerKind::batchnorm);
    CHECK(l[2].weight.shape() == nn::Shape{12, 24});
    CHECK(l[4].weight.shape() == nn::Shape{2, 12});
    CHECK(l[4].activation == nn::Activation::none);
    CHECK(l[0].l2 == 0.001);

    Agent large(35, 6, AgentConfig::large(), rng);
    CHECK(large.primary().layers()[0].weight.shape() == nn::Shape{48, 35});
    CHECK(large.primary().layers()[2].weight.shape() == nn::Shape{24, 48});
    CHECK(large.action_space() == 6);
    CHECK(same_params(large.primary(), large.target()));
}

TEST_CASE("greedy and softmax action selection") {
    CHECK(greedy_action(std::vector<double>{5, 1}) == 0);
    CHECK(greedy_action(std::vector<double>{1, 3, 3}) == 1);

    Rng rng(3);
    int zeros = 0;
    constexpr int kDraws = 20000;
    for (int i = 0; i < kDraws; ++i) zeros += softmax_action(std::vector<double>{1, 1}, 1.0, rng) == 0;
    CHECK(std::abs(zeros / double(kDraws) - 0.5) < 0.02);

    zeros = 0;
    for (int i = 0; i < kDraws; ++i) zeros += softmax_action(std::vector<double>{2, 0}, 0.01, rng) == 0;
    CHECK(zeros == kDraws);

    // P(0) = logistic(2 / tau) at tau = 1
    zeros = 0;
    for (int i = 0; i < kDraws; ++i) zeros += softmax_action(std::vector<double>{2, 0}, 1.0, rng) == 0;
    CHECK(std::abs(zeros / double(kDraws) - 1.0 / (1.0 + std::exp(-2.0))) < 0.02);

    auto a = constant_q_agent({5, 1});
    CHECK(a.act(std::vector<double>{0.3, -2}, 1.0, rng, true) == 0);
    CHECK_THROWS_AS(a.act(std::vector<double>{1, 2, 3}, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS(a.act(std::vector<double>{1, 2}, 0.0, rng, false), ConfigError);
}

TEST_CASE("greedy choice and softmax probabilities are shift invariant") {
    Rng rng(4);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> q(5);
        for (auto& v : q) v = n(rng);
        auto shifted = q;
        const double c = n(rng) * 10;
        for (auto& v : shifted) v += c;
        CHECK(greedy_action(q) == greedy_action(shifted));
        const auto p = nn::softmax(q, 0.7);
        const auto ps = nn::softmax(shifted, 0.7);
        for (std::size_t i = 0; i < q.size(); ++i) CHECK(p[i] == doctest::Approx(ps[i]).epsilon(1e-12));
    }
}

TEST_CASE("DDQN target decouples selection from evaluation") {
    AgentConfig cfg;
    cfg.hidden = {};
    cfg.batchnorm = false;
    Agent a(build_q_network(2, 2, cfg), cfg);
    auto& p = a.primary().layers()[0];
    p.weight.fill(0.0);
    p.bias[0] = 2;
    p.bias[1] = 0;
    a.sync_target();  // target Q = [2, 0]
    p.bias[0] = 1;
    p.bias[1] = 3;    // primary Q = [1, 3]

    Transition t{{0, 0}, 0, 0.5, {0, 0}, false};
    CHECK(a.ddqn_target(t) == doctest::Approx(0.5));
    // plain DQN would bootstrap from max target Q
    const auto tq = a.target_q_values(t.next_state);
    CHECK(t.reward + 0.9 * std::max(tq[0], tq[1]) == doctest::Approx(2.3));

    t.done = true;
    t.reward = 1.0;
    CHECK(a.ddqn_target(t) == 1.0);

    cfg.gamma = 0.0;
    Agent g(build_q_network(2, 2, cfg), cfg);
    g.primary().layers()[0].bias[0] = 7;
    Transition u{{0, 0}, 1, 0.25, {1, 1}, false};
    CHECK(g.ddqn_target(u) == 0.25);
}

TEST_CASE("replay buffer is a FIFO ring with uniform sampling") {
    ReplayBuffer b(1000);
    for (int i = 0; i < 1001; ++i) b.remember(make_transition(i));
    CHECK(b.size() == 1000);
    CHECK(b[0] == make_transition(1));
    CHECK(b[999] == make_transition(1000));
    for (std::size_t i = 1; i < b.size(); ++i) CHECK(b[i].reward == b[i - 1].reward + 1);

    ReplayBuffer small(64);
    for (int i = 0; i < 64; ++i) small.remember(make_transition(i));
    Rng rng(5);
    std::set<std::size_t> seen;
    for (int trial = 0; trial < 20; ++trial) {
        auto idx = small.sample_indices(64, rng);
        seen.insert(idx.begin(), idx.end());
    }
    CHECK(seen.size() == 64);

    // single-index draws cover all 64 slots, coupon collector needs about 64 * H(64) ~ 304
    std::set<std::size_t> singles;
    for (int trial = 0; trial < 2000; ++trial) singles.insert(small.sample_indices(1, rng)[0]);
    CHECK(singles.size() == 64);
    CHECK_THROWS_AS(small.sample_indices(65, rng), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "alrl_test_buffer.json";
    Transition odd{{0.1, 1e-300, -3.5}, 1, 1.0 / 3.0, {2.0, 0.0, 1e10}, true};
    small.remember(odd);
    save_buffer(path, small);
    auto loaded = load_buffer(path);
    std::filesystem::remove(path);
    CHECK(loaded.size() == 64);
    CHECK(loaded[63] == odd);
    CHECK(loaded[0] == small[0]);
}

TEST_CASE("greed and learning rate schedules") {
    GreedSchedule g{1.0, 0.2, 4000, 4000};
    CHECK(g(0) == 1.0);
    CHECK(g(3999) == 1.0);
    CHECK(g(6000) == doctest::Approx(0.6));
    CHECK(g(8000) == doctest::Approx(0.2));
    CHECK(g(100000) == doctest::Approx(0.2));
    double prev = 2.0;
    for (long t = 0; t < 10000; t += 7) {
        CHECK(g(t) <= prev);
        CHECK(g(t) >= 0.2 - 1e-15);
        prev = g(t);
    }

    LearningRateSchedule lr{1e-3, 1e-5, 12000};
    CHECK(lr(0) == 1e-3);
    CHECK(lr(11999) == doctest::Approx(1e-5));
    CHECK(lr(50000) == doctest::Approx(1e-5));
    prev = 1.0;
    for (long t = 0; t < 12000; t += 13) {
        CHECK(lr(t) <= prev);
        prev = lr(t);
    }
}

TEST_CASE("train step warm-up, target sync and staleness") {
    Rng rng(6);
    Agent a(4, 3, AgentConfig::large(), rng);
    ReplayBuffer b(1000);
    std::normal_distribution<double> n(0.0, 1.0);
    auto random_transition = [&] {
        Transition t;
        for (int i = 0; i < 4; ++i) t.state.push_back(n(rng));
        for (int i = 0; i < 4; ++i) t.next_state.push_back(n(rng));
        t.action = static_cast<std::size_t>(std::abs(n(rng)) * 10) % 3;
        t.reward = n(rng);
        t.done = n(rng) > 1.0;
        return t;
    };
    for (int i = 0; i < 63; ++i) b.remember(random_transition());
    const auto before = a.primary();
    CHECK(a.train_step(b, 1e-3, rng) == 0.0);
    CHECK(a.update_counter() == 0);
    CHECK(same_params(before, a.primary()));

    b.remember(random_transition());
    const auto initial_target = a.target();
    for (int i = 1; i <= 10; ++i) {
        CHECK(a.train_step(b, 1e-3, rng) > 0.0);
        if (i < 10) {
            CHECK(same_params(a.target(), initial_target));
            CHECK_FALSE(same_params(a.target(), a.primary()));
        }
    }
    CHECK(a.update_counter() == 10);
    CHECK(same_params(a.target(), a.primary()));
}

TEST_CASE("batch already at its targets has zero loss") {
    AgentConfig cfg;
    cfg.hidden = {8};
    cfg.batchnorm = false;
    cfg.l2 = 0.0;
    cfg.gamma = 0.0;
    Rng rng(7);
    Agent a(3, 2, cfg, rng);
    ReplayBuffer b(1000);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 64; ++i) {
        Transition t{{u(rng), u(rng), u(rng)}, static_cast<std::size_t>(i % 2), 0.0, {0, 0, 0}, true};
        t.reward = a.q_values(t.state)[t.action];
        b.remember(t);
    }
    const auto before = a.primary();
    CHECK(a.train_step(b, 0.01, rng) == doctest::Approx(0.0).epsilon(1e-20));
    CHECK(same_params(before, a.primary()));
}

TEST_CASE("regression on frozen targets trends downward") {
    AgentConfig cfg = AgentConfig::small();
    cfg.gamma = 0.0;
    Rng rng(8);
    Agent a(5, 2, cfg, rng);
    ReplayBuffer b(1000);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 500; ++i) {
        Transition t;
        for (int k = 0; k < 5; ++k) t.state.push_back(u(rng));
        t.action = static_cast<std::size_t>(i % 2);
        t.reward = t.state[0] - 0.5 * t.state[1] + (t.action == 1 ? 0.3 : -0.3);
        t.next_state = t.state;
        t.done = true;
        b.remember(t);
    }
    std::vector<double> losses;
    for (int i = 0; i < 100; ++i) losses.push_back(a.train_step(b, 0.01, rng));
    // least-squares slope of loss against step
    const double n = static_cast<double>(losses.size());
    const double mx = (n - 1) / 2.0;
    const double my = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        sxy += (static_cast<double>(i) - mx) * (losses[i] - my);
        sxx += (static_cast<double>(i) - mx) * (static_cast<double>(i) - mx);
    }
    CHECK(sxy / sxx < 0.0);
}

TEST_CASE("toy MDP converges to the value-iteration fixed point") {
    const auto oracle = alrl::testing::toy_value_iteration(0.9);
    CHECK(oracle[0][0] == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(oracle[0][1] == doctest::Approx(9.0).epsilon(1e-10));
    auto a = alrl::testing::train_toy(5000, 0.01, 1);
    CHECK(alrl::testing::toy_q_error(a, oracle) <= 1e-2);
    Rng rng(0);
    CHECK(a.act(alrl::testing::ToyMdp::features(1), 1.0, rng, true) == 1);
}

TEST_CASE("agent checkpoint round trip") {
    Rng rng(9);
    Agent a(35, 6, AgentConfig::large(), rng);
    const auto path = std::filesystem::temp_directory_path() / "alrl_test_agent.bin";
    save_agent(path, a, {1234, 0.45, 3e-4});
    auto loaded = load_agent(path);
    std::filesystem::remove(path);
    CHECK(loaded.meta.step == 1234);
    CHECK(loaded.meta.tau == 0.45);
    CHECK(loaded.meta.lr == 3e-4);
    CHECK(loaded.agent.state_dim() == 35);
    CHECK(loaded.agent.config().hidden == std::vector<std::size_t>{48, 24});
    CHECK(same_params(loaded.agent.primary(), a.primary()));
    std::vector<double> s(35, 0.1);
    CHECK(loaded.agent.q_values(s) == a.q_values(s));
}
