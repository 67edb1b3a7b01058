#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "alrl/agent/ddqn.hpp"
#include "alrl/classifier/ic_model.hpp"
#include "alrl/env/al_env.hpp"

namespace alrl::harness {

enum class DatasetKind { synthetic, mnist };

struct ExperimentConfig {
    std::string name = "exp2";
    env::EnvConfig env;
    classifier::ICModelConfig classifier;
    agent::AgentConfig agent = agent::AgentConfig::large();

    long total_interactions = 12000;
    long exploration = 4000;
    long conversion = 4000;
    double tau_start = 1.0;
    double tau_end = 0.2;
    double lr_start = 1e-3;
    double lr_end = 1e-5;
    std::size_t memory = 1000;

    int eval_runs = 15;
    int eval_every_games = 10;
    int eval_max_interactions = 0;  // 0: env.max_interactions_per_game
    std::uint64_t seed = 1;
    int threads = 0;                // 0: hardware concurrency

    DatasetKind dataset = DatasetKind::mnist;
    std::string data_dir;           // empty: $ALRL_DATA_DIR
    data::SyntheticSpec synthetic;
    std::size_t pool_size = 0;      // 0: whole training set
    std::size_t validation_size = 1000;
    std::vector<int> checkpoints = {100, 400, 800};

    void validate() const;
    int eval_cap() const { return eval_max_interactions > 0 ? eval_max_interactions : env.max_interactions_per_game; }
};

/// "exp1", "exp2", "exp3" (full scale, MNIST) or "desk" (synthetic, small).
ExperimentConfig preset(const std::string& name);

/// Flat `key = value` lines, '#' comments. Keys are matched ignoring case,
/// spaces and a trailing "(...)", so both `targetNetworkUpdateRate (C)` and
/// `targetnetworkupdaterate` work. A `preset` key, if present, must come first
/// and selects the base configuration. Unknown keys are errors.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_config_text(const ExperimentConfig& cfg);

struct ExperimentData {
    std::shared_ptr<const data::Dataset> train;
    std::shared_ptr<const data::Dataset> validation;  // the reduced split used for rewards
};

/// Synthetic data from the config, or MNIST from data_dir / $ALRL_DATA_DIR.
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

}  // namespace alrl::harness
