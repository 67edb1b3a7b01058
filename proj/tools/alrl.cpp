// Command-line driver: train, eval, baselines, diagnose.
#include <chrono>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "alrl/errors.hpp"
#include "alrl/harness/emit.hpp"

namespace fs = std::filesystem;
using namespace alrl;
using namespace alrl::harness;

namespace {

std::string slug(const std::string& name) {
    std::string s;
    for (char c : name) s += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_';
    return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Curves, table (csv + text) and plot for a set of strategies.
void emit_results(const fs::path& out, const ExperimentConfig& cfg, const std::vector<EvalCurve>& curves) {
    for (const auto& c : curves) {
        write_file(out / (slug(c.strategy) + "_curves.csv"), [&](std::ostream& o) { write_curves_csv(o, c); });
        if (c.truncated_runs() > 0) {
            std::cerr << c.strategy << ": " << c.truncated_runs() << " run(s) hit the interaction cap\n";
        }
    }
    const auto rows = comparison_table(curves, cfg.checkpoints);
    write_file(out / "table.csv", [&](std::ostream& o) { write_table_csv(o, rows, cfg.checkpoints); });
    const auto text = format_table(rows, cfg.checkpoints);
    write_file(out / "table.txt", [&](std::ostream& o) { o << text; });
    write_file(out / "plot.svg", [&](std::ostream& o) { write_svg_plot(o, curves, cfg.name + ": F1 vs added images"); });
    std::cout << text;
}

int cmd_train(const std::string& config_path, const fs::path& out) {
    const auto cfg = load_config(config_path);
    const auto data = load_experiment_data(cfg);
    std::cout << "training " << cfg.name << " (" << env::to_string(cfg.env.mode) << "), " << cfg.total_interactions
              << " interactions, pool " << data.train->size() << ", validation " << data.validation->size() << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    TrainHooks hooks;
    hooks.on_game = [&](const GameSummary& g) {
        std::cout << "game " << g.game << ": " << g.interactions << " interactions, reward " << g.cumulated_reward
                  << ", loss " << g.cumulated_loss << ", F1 " << g.final_f1 << " [" << seconds_since(t0) << "s]\n";
    };
    hooks.on_evaluation = [](int game, double score, bool improved) {
        std::cout << "  evaluation after game " << game << ": " << score << (improved ? " (best)" : "") << "\n";
    };
    auto res = train_agent(cfg, data, hooks);
    fs::create_directories(out);
    agent::save_agent(out / "agent.bin", res.best, res.best_meta);
    agent::save_agent(out / "final_agent.bin", res.final_agent,
                      {cfg.total_interactions, res.log.empty() ? cfg.tau_start : res.log.back().tau,
                       res.log.empty() ? cfg.lr_start : res.log.back().lr});
    agent::save_buffer(out / "buffer.json", res.buffer);
    write_file(out / "training_log.csv", [&](std::ostream& o) { write_training_log_csv(o, res.log); });
    write_file(out / "games.csv", [&](std::ostream& o) { write_games_csv(o, res.games); });
    write_file(out / "config.cfg", [&](std::ostream& o) { o << to_config_text(cfg); });
    std::cout << "wrote " << (out / "agent.bin").string() << " (step " << res.best_meta.step
              << (res.best_from_evaluation ? ", best evaluation " + std::to_string(res.best_score) : ", final agent")
              << ") in " << seconds_since(t0) << "s\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config_path, int runs, const fs::path& out) {
    auto cfg = load_config(config_path);
    if (runs > 0) cfg.eval_runs = runs;
    const auto loaded = agent::load_agent(checkpoint);
    if (loaded.agent.state_dim() != cfg.env.state_dim() || loaded.agent.action_space() != cfg.env.action_space()) {
        throw ConfigError("checkpoint does not match the environment of " + config_path);
    }
    const auto data = load_experiment_data(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    auto curve = evaluate_agent(cfg, data, loaded.agent);
    emit_results(out, cfg, {curve});
    std::cout << cfg.eval_runs << " runs in " << seconds_since(t0) << "s\n";
    return 0;
}

int cmd_baselines(const std::string& config_path, const std::vector<std::string>& which, const std::string& checkpoint,
                  int runs, const fs::path& out) {
    auto cfg = load_config(config_path);
    if (runs > 0) cfg.eval_runs = runs;
    const auto data = load_experiment_data(cfg);
    std::vector<EvalCurve> curves;
    for (const auto& name : which) {
        const auto t0 = std::chrono::steady_clock::now();
        Baseline b = name == "random" ? Baseline::random : name == "bvsb1" ? Baseline::bvsb1 : Baseline::bvsb2;
        curves.push_back(evaluate_baseline(cfg, data, b));
        std::cout << to_string(b) << ": " << cfg.eval_runs << " runs in " << seconds_since(t0) << "s\n";
    }
    if (!checkpoint.empty()) {
        const auto loaded = agent::load_agent(checkpoint);
        curves.push_back(evaluate_agent(cfg, data, loaded.agent));
    }
    emit_results(out, cfg, curves);
    return 0;
}

int cmd_diagnose(const std::string& checkpoint, const std::string& buffer_path, const fs::path& out, int samples,
                 int points, std::uint64_t seed) {
    const auto loaded = agent::load_agent(checkpoint);
    const auto buffer = agent::load_buffer(buffer_path);
    agent::Rng rng(seed);
    const auto sweep = diagnose_q_correlation(loaded.agent, buffer, rng, samples, points);
    write_file(out, [&](std::ostream& o) { write_sweep_csv(o, sweep); });
    std::cout << "wrote " << sweep.size() << " sweep points to " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active learning with a Double-DQN agent: training, evaluation, baselines and diagnostics.\n"
                 "MNIST configs read IDX files from dataDir or $ALRL_DATA_DIR."};
    app.require_subcommand(1);

    std::string config, checkpoint, buffer;
    std::string out = "results";
    int runs = 0;

    auto* train = app.add_subcommand("train", "train an agent");
    train->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out, "output directory")->capture_default_str();

    auto* eval = app.add_subcommand("eval", "evaluate a trained agent");
    eval->add_option("--checkpoint", checkpoint, "agent checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    eval->add_option("--runs", runs, "evaluation runs (default from config)");
    eval->add_option("--out", out, "output directory")->capture_default_str();

    std::vector<std::string> which = {"random", "bvsb1", "bvsb2"};
    auto* base = app.add_subcommand("baselines", "evaluate the baseline strategies");
    base->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
    base->add_option("--only", which, "subset of random, bvsb1, bvsb2")
        ->delimiter(',')
        ->check(CLI::IsMember({"random", "bvsb1", "bvsb2"}));
    base->add_option("--checkpoint", checkpoint, "also evaluate this agent")->check(CLI::ExistingFile);
    base->add_option("--runs", runs, "evaluation runs (default from config)");
    base->add_option("--out", out, "output directory")->capture_default_str();

    int samples = 5, points = 21;
    std::uint64_t seed = 1;
    std::string sweep_out = "q_sweep.csv";
    auto* diag = app.add_subcommand("diagnose", "sweep Q-values against margin and entropy features");
    diag->add_option("--checkpoint", checkpoint, "agent checkpoint")->required()->check(CLI::ExistingFile);
    diag->add_option("--buffer", buffer, "replay buffer written by train")->required()->check(CLI::ExistingFile);
    diag->add_option("--out", sweep_out, "output CSV")->capture_default_str();
    diag->add_option("--samples", samples, "base states per feature")->capture_default_str();
    diag->add_option("--points", points, "sweep points per base state")->capture_default_str();
    diag->add_option("--seed", seed, "sampling seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) return cmd_train(config, out);
        if (*eval) return cmd_eval(checkpoint, config, runs, out);
        if (*base) return cmd_baselines(config, which, checkpoint, runs, out);
        if (*diag) return cmd_diagnose(checkpoint, buffer, sweep_out, samples, points, seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
