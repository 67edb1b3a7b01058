#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "alrl/harness/experiment.hpp"

namespace alrl::harness {

/// run,x,f1_raw,f1_smoothed: one block per run (smoothed within the run),
/// then run = "mean" with the aggregated curve.
void write_curves_csv(std::ostream& out, const EvalCurve& curve);
/// interaction,game,loss,reward,tau,lr
void write_training_log_csv(std::ostream& out, std::span<const TrainLogRow> rows);
/// game,interactions,cumulated_reward,cumulated_loss,added_images,final_f1
void write_games_csv(std::ostream& out, std::span<const GameSummary> games);
/// feature,name,action,sample,value,q
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

struct TableRow {
    std::string strategy;
    std::vector<double> values;  // one per checkpoint
};

/// Checkpoint values of each curve's smoothed series.
std::vector<TableRow> comparison_table(std::span<const EvalCurve> curves, std::span<const int> checkpoints);
/// strategy,f1@100,f1@400,f1@800 with two decimals.
void write_table_csv(std::ostream& out, std::span<const TableRow> rows, std::span<const int> checkpoints);
/// The same table with aligned columns for terminals.
std::string format_table(std::span<const TableRow> rows, std::span<const int> checkpoints);

/// F1 vs added images, one polyline per smoothed curve.
void write_svg_plot(std::ostream& out, std::span<const EvalCurve> curves, const std::string& title);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

/// Plain comma-separated values without quoting, as written above.
CsvTable read_csv(std::istream& in);

/// Writes through `write` to `path`, creating parent directories; IO errors name the path.
void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& write);

}  // namespace alrl::harness
