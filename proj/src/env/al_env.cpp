#include "alrl/env/al_env.hpp"

#include <algorithm>
#include <ostream>

#include "alrl/errors.hpp"
#include "alrl/sampling/uncertainty.hpp"

namespace alrl::env {

std::string to_string(EnvMode mode) {
    switch (mode) {
        case EnvMode::exp1_single: return "exp1";
        case EnvMode::exp2_sample: return "exp2";
        case EnvMode::exp3_bundle: return "exp3";
    }
    return "?";
}

EnvMode parse_env_mode(const std::string& s) {
    if (s == "exp1" || s == "exp1_single") return EnvMode::exp1_single;
    if (s == "exp2" || s == "exp2_sample") return EnvMode::exp2_sample;
    if (s == "exp3" || s == "exp3_bundle") return EnvMode::exp3_bundle;
    throw ConfigError("unknown environment mode '" + s + "'");
}

void EnvConfig::validate() const {
    if (budget <= 0) throw ConfigError("budget must be positive");
    if (initial_points_per_class <= 0) throw ConfigError("initial points per class must be positive");
    if (max_interactions_per_game <= 0) throw ConfigError("max interactions per game must be positive");
    if (mode != EnvMode::exp1_single && sample_size < 1) throw ConfigError("sample size must be at least 1");
    if (mode == EnvMode::exp3_bundle) {
        if (bundle_size < 1) throw ConfigError("bundle size must be at least 1");
        if (subgame_length <= 0) throw ConfigError("sub-game length must be positive");
    }
    if (!(reward_scale > 0.0)) throw ConfigError("reward scale must be positive");
    if (!(f1_alpha >= 0.0 && f1_alpha < 1.0)) throw ConfigError("F1 tracker alpha must be in [0, 1)");
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
    out << "interaction,action,reward,labeled,raw_f1,tracked_f1\n";
    for (const auto& r : rows) {
        out << r.interaction << ',' << r.action << ',' << r.reward << ',' << r.labeled << ',' << r.raw_f1 << ','
            << r.tracked_f1 << '\n';
    }
}

ALEnv::ALEnv(EnvConfig config, std::shared_ptr<const data::Dataset> train,
             std::shared_ptr<const data::Dataset> reduced_val, classifier::ICModelConfig model_config,
             std::uint64_t seed)
    : config_(config),
      train_(std::move(train)),
      val_(std::move(reduced_val)),
      rng_(seed),
      pool_(train_),
      model_(model_config, train_->sample_shape(), train_->num_classes),
      tracker_(config.f1_alpha) {
    config_.validate();
    if (val_->num_classes != train_->num_classes) throw ConfigError("train and validation class counts differ");
    if (val_->sample_shape() != train_->sample_shape()) throw ConfigError("train and validation image shapes differ");
}

double ALEnv::evaluate_and_track() {
    raw_f1_ = classifier::macro_f1(model_, *val_);
    tracker_.update(raw_f1_);
    return raw_f1_;
}

std::vector<Id> ALEnv::slot_ids_except(std::size_t slot) const {
    std::vector<Id> ids;
    for (std::size_t s = 0; s < slots_.size(); ++s) {
        if (s != slot) ids.insert(ids.end(), slots_[s].begin(), slots_[s].end());
    }
    return ids;
}

void ALEnv::refill_slot(std::size_t slot) {
    const auto exclude = slot_ids_except(slot);
    slots_[slot] = data::draw_candidates(pool_, config_.images_per_slot(), rng_, exclude);
}

State ALEnv::reset() {
    pool_ = data::DataPool(train_);
    data::build_seed_set(pool_, config_.initial_points_per_class, rng_);
    seed_size_ = pool_.labeled().size();
    model_.reinitialize(rng_);
    classifier::fit(model_, pool_, *val_, rng_);
    ++fits_;
    tracker_.reset();
    evaluate_and_track();
    initial_f1_ = reward_baseline_ = tracker_.current();
    added_images_ = added_since_soft_ = interactions_ = 0;
    done_ = false;

    slots_.assign(config_.slot_count(), {});
    try {
        for (std::size_t s = 0; s < slots_.size(); ++s) refill_slot(s);
    } catch (const PoolExhaustedError&) {
        throw ConfigError("training pool too small for the candidate slots");
    }
    return build_state();
}

State ALEnv::build_state() const {
    State state;
    state.reserve(config_.state_dim());
    for (const auto& slot : slots_) {
        const auto probs = model_.predict_proba(data::gather_images(*train_, slot));
        double entropy = 0.0, margin = 0.0;
        for (std::size_t i = 0; i < slot.size(); ++i) {
            const auto s = sampling::score(probs.row(i));
            entropy += s.entropy;
            margin += s.margin;
        }
        const double n = static_cast<double>(slot.size());
        state.push_back(entropy / n);
        state.push_back(margin / n);
    }
    const auto metrics = classifier::extract_metrics(model_);
    state.insert(state.end(), metrics.begin(), metrics.end());
    state.push_back(tracker_.current());
    return state;
}

double ALEnv::add_images(std::span<const Id> ids) {
    for (Id id : ids) pool_.label(id);
    classifier::fit(model_, pool_, *val_, rng_);
    ++fits_;
    const int n = static_cast<int>(ids.size());
    added_images_ += n;
    added_since_soft_ += n;
    return evaluate_and_track();
}

StepResult ALEnv::step(std::size_t action) {
    if (done_) throw LogicError("step() on a finished game; call reset()");
    if (action >= action_space()) {
        throw LogicError("action " + std::to_string(action) + " out of range [0, " +
                         std::to_string(action_space()) + ")");
    }
    ++interactions_;
    ++total_interactions_;

    StepResult r;
    bool exhausted = false;
    std::size_t slot = action;
    if (action < config_.slot_count()) {
        const auto ids = slots_[action];
        add_images(ids);
        r.info.images_this_step = static_cast<int>(ids.size());
    } else {
        // nothing labeled; one slot chosen uniformly gets fresh candidates
        std::uniform_int_distribution<std::size_t> pick(0, slots_.size() - 1);
        slot = pick(rng_);
    }
    try {
        refill_slot(slot);
    } catch (const PoolExhaustedError&) {
        exhausted = true;
    }

    const bool budget_reached = added_images_ >= config_.budget;
    const bool out_of_time = interactions_ >= config_.max_interactions_per_game;
    const bool game_end = budget_reached || out_of_time || exhausted;
    const bool subgame_end =
        config_.mode == EnvMode::exp3_bundle && added_since_soft_ >= config_.subgame_length;

    if (config_.reward_shaping || game_end || subgame_end) {
        r.reward = (tracker_.current() - reward_baseline_) * config_.reward_scale;
        reward_baseline_ = tracker_.current();
    }
    if (subgame_end) {
        initial_f1_ = tracker_.current();
        added_since_soft_ = 0;
    }
    done_ = game_end;

    r.done = done_;
    r.state = build_state();
    r.info.raw_f1 = raw_f1_;
    r.info.tracked_f1 = tracker_.current();
    r.info.labeled = pool_.labeled().size();
    r.info.added_images = added_images_;
    r.info.interactions = interactions_;
    r.info.subgame_end = subgame_end;
    r.info.pool_exhausted = exhausted;
    r.info.truncated = out_of_time && !budget_reached;

    if (trace_enabled_) {
        trace_.push_back({total_interactions_, static_cast<int>(action), r.reward, r.info.labeled, raw_f1_,
                          tracker_.current()});
    }
    return r;
}

}  // namespace alrl::env
