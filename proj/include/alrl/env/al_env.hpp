#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "alrl/classifier/ic_model.hpp"
#include "alrl/data/pool.hpp"

namespace alrl::env {

using data::Id;
using data::Rng;

enum class EnvMode {
    exp1_single,  // one image per state; actions {label, notLabel}
    exp2_sample,  // s images per state; actions 0..s-1 label slot i, s = pick none
    exp3_bundle,  // s bundles of bundle_size images; sub-games with soft resets
};

std::string to_string(EnvMode mode);
EnvMode parse_env_mode(const std::string& s);

struct EnvConfig {
    EnvMode mode = EnvMode::exp2_sample;
    int budget = 800;
    int initial_points_per_class = 5;
    bool reward_shaping = false;
    int max_interactions_per_game = 1200;
    std::size_t sample_size = 5;
    std::size_t bundle_size = 5;
    int subgame_length = 50;
    double reward_scale = 1.0;
    double f1_alpha = 0.7;

    void validate() const;

    std::size_t slot_count() const { return mode == EnvMode::exp1_single ? 1 : sample_size; }
    std::size_t images_per_slot() const { return mode == EnvMode::exp3_bundle ? bundle_size : 1; }
    /// Label actions are [0, slot_count()), the last action picks nothing.
    std::size_t action_space() const { return slot_count() + 1; }
    /// 2 per slot + 24 model metrics + tracked F1 (27 for exp1, 35 for s = 5).
    std::size_t state_dim() const { return 2 * slot_count() + classifier::kModelMetricCount + 1; }
};

using State = std::vector<double>;

struct StepInfo {
    double raw_f1 = 0.0;
    double tracked_f1 = 0.0;
    std::size_t labeled = 0;
    int added_images = 0;       // since the last hard reset
    int images_this_step = 0;
    int interactions = 0;
    bool subgame_end = false;
    bool pool_exhausted = false;
    bool truncated = false;     // ended by max_interactions_per_game before the budget
};

struct StepResult {
    State state;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

/// One row per interaction: (interaction, action, reward, |L|, raw_f1, tracked_f1).
struct TraceRow {
    int interaction = 0;
    int action = 0;
    double reward = 0.0;
    std::size_t labeled = 0;
    double raw_f1 = 0.0;
    double tracked_f1 = 0.0;
};

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows);

/// Gym-style active-learning environment. Owns its pool, classifier and rng;
/// the datasets are shared read-only.
///
/// Rewards are the change in tracked F1 since the last issued reward, times
/// reward_scale. They are issued every step with reward shaping, otherwise
/// only when the game ends and (exp3) when a sub-game of subgame_length
/// added images completes, which also soft-resets the sub-game baseline.
class ALEnv {
public:
    ALEnv(EnvConfig config, std::shared_ptr<const data::Dataset> train,
          std::shared_ptr<const data::Dataset> reduced_val, classifier::ICModelConfig model_config,
          std::uint64_t seed);

    /// Hard reset: fresh seed set, re-initialized classifier fit on it, tracker
    /// and counters reset, new candidates drawn.
    State reset();
    StepResult step(std::size_t action);

    /// Per-slot [entropy, margin] (bundle means in exp3), 24 model metrics, tracked F1.
    State build_state() const;

    /// Labels `ids` directly, refits and updates the tracker; returns the raw F1.
    /// Used by the pool-based baselines that bypass the candidate slots.
    double add_images(std::span<const Id> ids);

    const EnvConfig& config() const noexcept { return config_; }
    std::size_t action_space() const noexcept { return config_.action_space(); }
    std::size_t state_dim() const noexcept { return config_.state_dim(); }
    std::size_t no_label_action() const noexcept { return config_.slot_count(); }

    const data::DataPool& pool() const noexcept { return pool_; }
    const classifier::ICModel& model() const noexcept { return model_; }
    const classifier::F1Tracker& tracker() const noexcept { return tracker_; }
    const std::vector<std::vector<Id>>& slots() const noexcept { return slots_; }
    Rng& rng() noexcept { return rng_; }

    double initial_f1() const noexcept { return initial_f1_; }
    double raw_f1() const noexcept { return raw_f1_; }
    int added_images() const noexcept { return added_images_; }
    int added_since_soft_reset() const noexcept { return added_since_soft_; }
    int interactions() const noexcept { return interactions_; }
    std::size_t seed_size() const noexcept { return seed_size_; }
    bool done() const noexcept { return done_; }
    int fits() const noexcept { return fits_; }

    void enable_trace(bool on) { trace_enabled_ = on; }
    const std::vector<TraceRow>& trace() const noexcept { return trace_; }

private:
    void refill_slot(std::size_t slot);
    std::vector<Id> slot_ids_except(std::size_t slot) const;
    double evaluate_and_track();

    EnvConfig config_;
    std::shared_ptr<const data::Dataset> train_;
    std::shared_ptr<const data::Dataset> val_;
    Rng rng_;
    data::DataPool pool_;
    classifier::ICModel model_;
    classifier::F1Tracker tracker_;
    std::vector<std::vector<Id>> slots_;

    double initial_f1_ = 0.0;
    double reward_baseline_ = 0.0;
    double raw_f1_ = 0.0;
    int added_images_ = 0;
    int added_since_soft_ = 0;
    int interactions_ = 0;
    std::size_t seed_size_ = 0;
    int fits_ = 0;
    bool done_ = true;
    bool trace_enabled_ = false;
    int total_interactions_ = 0;
    std::vector<TraceRow> trace_;
};

}  // namespace alrl::env
