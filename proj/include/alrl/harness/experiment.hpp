#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alrl/agent/ddqn.hpp"
#include "alrl/harness/config.hpp"

namespace alrl::harness {

/// Tracked F1 after each added image: f1[i] belongs to x = i + 1 images.
struct RunCurve {
    std::vector<double> f1;
    bool truncated = false;  // interaction cap hit before the budget; padded with the last value
    int interactions = 0;
};

struct EvalCurve {
    std::string strategy;
    std::vector<RunCurve> runs;
    std::vector<double> mean;      // over runs, per x
    std::vector<double> smoothed;  // window-10 smoothing of `mean`

    int truncated_runs() const;
};

/// Trailing moving average; the first points average the samples available.
std::vector<double> smooth(std::span<const double> y, std::size_t window = 10);

/// Mean of `curve` over x in [x - half, x + half] clipped to [1, curve.size()].
double checkpoint_value(std::span<const double> curve, int x, int half = 10);

/// Averages runs, then smooths. All runs must have the same length.
EvalCurve aggregate(std::string strategy, std::vector<RunCurve> runs);

/// Per-run seed shared by every strategy, so run i starts from the same seed set and classifier.
std::uint64_t run_seed(std::uint64_t base, int run);

/// Runs `play(run)` for run = 0..runs-1 on up to `threads` threads and
/// aggregates in run order. threads <= 0 uses the hardware concurrency.
EvalCurve evaluate(const std::string& strategy, int runs, int threads, const std::function<RunCurve(int)>& play);

enum class Baseline { random, bvsb1, bvsb2 };
std::string to_string(Baseline b);

/// One evaluation game of a pool-based baseline: random picks uniformly from U,
/// bvsb1 takes the smallest-margin image of all of U, bvsb2 draws 5 fresh
/// candidates per decision and applies the decaying threshold. The classifier
/// is refit after every added image. bvsb2 decisions count as interactions.
RunCurve run_baseline(const ExperimentConfig& cfg, const ExperimentData& data, Baseline b, std::uint64_t seed);
EvalCurve evaluate_baseline(const ExperimentConfig& cfg, const ExperimentData& data, Baseline b);

/// One greedy game of `agent` in the configured environment mode.
RunCurve run_agent(const ExperimentConfig& cfg, const ExperimentData& data, const agent::Agent& agent,
                   std::uint64_t seed);
EvalCurve evaluate_agent(const ExperimentConfig& cfg, const ExperimentData& data, const agent::Agent& agent,
                         const std::string& name = "DDQN");

struct TrainLogRow {
    long interaction = 0;
    int game = 0;
    double loss = 0.0;
    double reward = 0.0;
    double tau = 0.0;
    double lr = 0.0;
};

struct GameSummary {
    int game = 0;
    long interactions = 0;
    double cumulated_reward = 0.0;
    double cumulated_loss = 0.0;
    int added_images = 0;
    double final_f1 = 0.0;
};

struct TrainResult {
    agent::Agent best;
    agent::AgentMeta best_meta;
    double best_score = 0.0;
    bool best_from_evaluation = false;  // false: no evaluation game ran, `best` is the final agent
    agent::Agent final_agent;
    agent::ReplayBuffer buffer;
    std::vector<TrainLogRow> log;
    std::vector<GameSummary> games;
    long transitions = 0;
};

struct TrainHooks {
    std::function<void(const GameSummary&)> on_game;
    std::function<void(int game, double score, bool improved)> on_evaluation;
};

/// Interaction loop: softmax-greedy actions under the tau schedule, every
/// transition remembered, one train step per interaction under the lr
/// schedule. Every eval_every_games finished games the current agent plays
/// one greedy evaluation game; the agent with the best cumulated evaluation
/// reward is kept.
TrainResult train_agent(const ExperimentConfig& cfg, const ExperimentData& data, const TrainHooks& hooks = {});

struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // population
};

/// Per-feature mean and standard deviation of the stored states (Welford).
FeatureStats buffer_feature_stats(const agent::ReplayBuffer& buffer);

struct SweepPoint {
    std::size_t feature = 0;
    std::string feature_name;  // e.g. "margin_0", "entropy_2"
    std::size_t action = 0;    // label action of the feature's slot
    int sample = 0;
    double value = 0.0;
    double q = 0.0;
};

/// For every entropy and margin slot feature, `samples` base states are drawn
/// with s_m ~ U(mu_m - 2 sigma_m, mu_m + 2 sigma_m); the feature is then swept
/// over `points` evenly spaced values of its range while the others stay fixed,
/// recording Q of the slot's label action. A feature with sigma = 0 yields one point.
std::vector<SweepPoint> diagnose_q_correlation(const agent::Agent& agent, const agent::ReplayBuffer& buffer,
                                               agent::Rng& rng, int samples = 5, int points = 21);

}  // namespace alrl::harness
