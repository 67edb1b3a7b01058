#include "alrl/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "alrl/errors.hpp"
#include "alrl/sampling/uncertainty.hpp"

namespace alrl::harness {

int EvalCurve::truncated_runs() const {
    return static_cast<int>(std::count_if(runs.begin(), runs.end(), [](const RunCurve& r) { return r.truncated; }));
}

std::vector<double> smooth(std::span<const double> y, std::size_t window) {
    if (window == 0) throw ConfigError("smoothing window must be positive");
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t n = std::min(i + 1, window);
        double sum = 0.0;
        for (std::size_t k = i + 1 - n; k <= i; ++k) sum += y[k];
        out[i] = sum / static_cast<double>(n);
    }
    return out;
}

double checkpoint_value(std::span<const double> curve, int x, int half) {
    if (curve.empty()) throw ConfigError("empty curve");
    const int n = static_cast<int>(curve.size());
    const int lo = std::clamp(x - half, 1, n);
    const int hi = std::clamp(x + half, 1, n);
    double sum = 0.0;
    for (int i = lo; i <= hi; ++i) sum += curve[static_cast<std::size_t>(i - 1)];
    return sum / (hi - lo + 1);
}

EvalCurve aggregate(std::string strategy, std::vector<RunCurve> runs) {
    if (runs.empty()) throw ConfigError("no runs to aggregate");
    const std::size_t len = runs.front().f1.size();
    EvalCurve c;
    c.strategy = std::move(strategy);
    c.mean.assign(len, 0.0);
    for (const auto& r : runs) {
        if (r.f1.size() != len) throw LogicError("runs of different length cannot be averaged");
        for (std::size_t i = 0; i < len; ++i) c.mean[i] += r.f1[i];
    }
    for (auto& v : c.mean) v /= static_cast<double>(runs.size());
    c.smoothed = smooth(c.mean);
    c.runs = std::move(runs);
    return c;
}

std::uint64_t run_seed(std::uint64_t base, int run) {
    // splitmix64 of (base, run)
    std::uint64_t z = base * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(run) + 1;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

EvalCurve evaluate(const std::string& strategy, int runs, int threads, const std::function<RunCurve(int)>& play) {
    if (runs <= 0) throw ConfigError("need at least one evaluation run");
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, runs);
    std::vector<RunCurve> results(static_cast<std::size_t>(runs));
    if (threads == 1) {
        for (int r = 0; r < runs; ++r) results[static_cast<std::size_t>(r)] = play(r);
        return aggregate(strategy, std::move(results));
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int r = next++; r < runs; r = next++) {
                try {
                    results[static_cast<std::size_t>(r)] = play(r);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return aggregate(strategy, std::move(results));
}

std::string to_string(Baseline b) {
    switch (b) {
        case Baseline::random: return "Random";
        case Baseline::bvsb1: return "BvsSB 1";
        case Baseline::bvsb2: return "BvsSB 2";
    }
    return "?";
}

namespace {

void pad(RunCurve& rc, std::size_t budget, double fallback) {
    if (rc.f1.size() < budget) {
        rc.truncated = true;
        rc.f1.resize(budget, rc.f1.empty() ? fallback : rc.f1.back());
    }
}

}  // namespace

RunCurve run_baseline(const ExperimentConfig& cfg, const ExperimentData& data, Baseline b, std::uint64_t seed) {
    env::ALEnv env(cfg.env, data.train, data.validation, cfg.classifier, seed);
    env.reset();
    const auto budget = static_cast<std::size_t>(cfg.env.budget);
    const int cap = cfg.eval_cap();
    RunCurve rc;
    sampling::ThresholdPolicy policy;
    try {
        while (rc.f1.size() < budget && rc.interactions < cap) {
            ++rc.interactions;
            data::Id id = 0;
            switch (b) {
                case Baseline::random: id = sampling::select_random(env.pool(), env.rng()); break;
                case Baseline::bvsb1: id = sampling::select_variant1(env.pool(), env.model()); break;
                case Baseline::bvsb2: {
                    const auto cands = data::draw_candidates(env.pool(), policy.sample_size, env.rng());
                    const auto d = sampling::select_variant2(policy, cands, env.model(), *data.train);
                    if (!d.add) continue;
                    id = *d.id;
                    break;
                }
            }
            env.add_images(std::span<const data::Id>(&id, 1));
            rc.f1.push_back(env.tracker().current());
        }
    } catch (const PoolExhaustedError&) {
        // fewer unlabeled images than the budget; the curve is padded below
    }
    pad(rc, budget, env.tracker().current());
    return rc;
}

EvalCurve evaluate_baseline(const ExperimentConfig& cfg, const ExperimentData& data, Baseline b) {
    return evaluate(to_string(b), cfg.eval_runs, cfg.threads,
                    [&](int run) { return run_baseline(cfg, data, b, run_seed(cfg.seed, run)); });
}

RunCurve run_agent(const ExperimentConfig& cfg, const ExperimentData& data, const agent::Agent& agent,
                   std::uint64_t seed) {
    auto ec = cfg.env;
    ec.max_interactions_per_game = cfg.eval_cap();
    env::ALEnv env(ec, data.train, data.validation, cfg.classifier, seed);
    auto state = env.reset();
    const auto budget = static_cast<std::size_t>(cfg.env.budget);
    agent::Rng unused(0);
    RunCurve rc;
    for (;;) {
        const auto r = env.step(agent.act(state, 1.0, unused, true));
        ++rc.interactions;
        for (int i = 0; i < r.info.images_this_step && rc.f1.size() < budget; ++i) rc.f1.push_back(r.info.tracked_f1);
        state = r.state;
        if (r.done) break;
    }
    pad(rc, budget, env.tracker().current());
    return rc;
}

EvalCurve evaluate_agent(const ExperimentConfig& cfg, const ExperimentData& data, const agent::Agent& agent,
                         const std::string& name) {
    return evaluate(name, cfg.eval_runs, cfg.threads,
                    [&](int run) { return run_agent(cfg, data, agent, run_seed(cfg.seed, run)); });
}

namespace {

/// Greedy game; returns the cumulated reward.
double evaluation_game(const ExperimentConfig& cfg, const ExperimentData& data, const agent::Agent& agent,
                       std::uint64_t seed) {
    auto ec = cfg.env;
    ec.max_interactions_per_game = cfg.eval_cap();
    env::ALEnv env(ec, data.train, data.validation, cfg.classifier, seed);
    auto state = env.reset();
    agent::Rng unused(0);
    double total = 0.0;
    for (;;) {
        const auto r = env.step(agent.act(state, 1.0, unused, true));
        total += r.reward;
        state = r.state;
        if (r.done) return total;
    }
}

}  // namespace

TrainResult train_agent(const ExperimentConfig& cfg, const ExperimentData& data, const TrainHooks& hooks) {
    cfg.validate();
    agent::Rng rng(run_seed(cfg.seed, -1));
    agent::Agent learner(cfg.env.state_dim(), cfg.env.action_space(), cfg.agent, rng);
    TrainResult out{learner, {}, -std::numeric_limits<double>::infinity(), false, learner, agent::ReplayBuffer(cfg.memory),
                    {}, {}, 0};
    const agent::GreedSchedule greed{cfg.tau_start, cfg.tau_end, cfg.exploration, cfg.conversion};
    const agent::LearningRateSchedule lr_schedule{cfg.lr_start, cfg.lr_end, cfg.total_interactions};
    const auto eval_seed = run_seed(cfg.seed, -2);

    env::ALEnv env(cfg.env, data.train, data.validation, cfg.classifier, run_seed(cfg.seed, -3));
    auto state = env.reset();
    GameSummary game;
    out.log.reserve(static_cast<std::size_t>(cfg.total_interactions));

    for (long t = 0; t < cfg.total_interactions; ++t) {
        const double tau = greed(t);
        const double lr = lr_schedule(t);
        const auto action = learner.act(state, tau, rng, false);
        auto r = env.step(action);
        out.buffer.remember({state, action, r.reward, r.state, r.done});
        ++out.transitions;
        const double loss = learner.train_step(out.buffer, lr, rng);
        out.log.push_back({t, game.game, loss, r.reward, tau, lr});

        ++game.interactions;
        game.cumulated_reward += r.reward;
        game.cumulated_loss += loss;
        state = std::move(r.state);
        if (!r.done) continue;

        game.added_images = env.added_images();
        game.final_f1 = env.tracker().current();
        out.games.push_back(game);
        if (hooks.on_game) hooks.on_game(game);
        if ((game.game + 1) % cfg.eval_every_games == 0) {
            const double score = evaluation_game(cfg, data, learner, eval_seed);
            const bool improved = score > out.best_score;
            if (improved) {
                out.best = learner;
                out.best_score = score;
                out.best_meta = {t + 1, tau, lr};
                out.best_from_evaluation = true;
            }
            if (hooks.on_evaluation) hooks.on_evaluation(game.game, score, improved);
        }
        game = GameSummary{game.game + 1};
        state = env.reset();
    }

    const long end = cfg.total_interactions;
    out.final_agent = learner;
    if (!out.best_from_evaluation) {
        out.best = learner;
        out.best_meta = {end, greed(end - 1), lr_schedule(end - 1)};
        out.best_score = 0.0;
    }
    return out;
}

FeatureStats buffer_feature_stats(const agent::ReplayBuffer& buffer) {
    if (buffer.empty()) throw ConfigError("replay buffer is empty");
    const std::size_t dim = buffer[0].state.size();
    std::vector<double> mean(dim, 0.0), m2(dim, 0.0);
    for (std::size_t n = 0; n < buffer.size(); ++n) {
        const auto& s = buffer[n].state;
        if (s.size() != dim) throw ConfigError("replay buffer mixes state dimensions");
        for (std::size_t k = 0; k < dim; ++k) {
            const double delta = s[k] - mean[k];
            mean[k] += delta / static_cast<double>(n + 1);
            m2[k] += delta * (s[k] - mean[k]);
        }
    }
    FeatureStats st{mean, std::vector<double>(dim)};
    for (std::size_t k = 0; k < dim; ++k) st.stddev[k] = std::sqrt(m2[k] / static_cast<double>(buffer.size()));
    return st;
}

std::vector<SweepPoint> diagnose_q_correlation(const agent::Agent& agent, const agent::ReplayBuffer& buffer,
                                               agent::Rng& rng, int samples, int points) {
    if (samples <= 0 || points <= 0) throw ConfigError("samples and points must be positive");
    const auto stats = buffer_feature_stats(buffer);
    const std::size_t dim = stats.mean.size();
    if (dim != agent.state_dim()) throw ConfigError("buffer states do not match the agent input");
    const std::size_t tail = classifier::kModelMetricCount + 1;
    if (dim < tail + 2 || (dim - tail) % 2 != 0) throw ConfigError("state layout has no slot features");
    const std::size_t slots = (dim - tail) / 2;

    std::vector<SweepPoint> out;
    for (std::size_t f = 0; f < 2 * slots; ++f) {
        const std::size_t slot = f / 2;
        const std::string name = (f % 2 == 0 ? "entropy_" : "margin_") + std::to_string(slot);
        const double lo = stats.mean[f] - 2.0 * stats.stddev[f];
        const double hi = stats.mean[f] + 2.0 * stats.stddev[f];
        const int n = stats.stddev[f] > 0.0 ? points : 1;
        for (int smp = 0; smp < samples; ++smp) {
            std::vector<double> base(dim);
            for (std::size_t k = 0; k < dim; ++k) {
                const double sd = stats.stddev[k];
                base[k] = sd > 0.0 ? std::uniform_real_distribution<double>(stats.mean[k] - 2 * sd,
                                                                             stats.mean[k] + 2 * sd)(rng)
                                   : stats.mean[k];
            }
            for (int i = 0; i < n; ++i) {
                const double v = n == 1 ? stats.mean[f] : lo + (hi - lo) * i / (n - 1);
                base[f] = v;
                out.push_back({f, name, slot, smp, v, agent.q_values(base)[slot]});
            }
        }
    }
    return out;
}

}  // namespace alrl::harness
