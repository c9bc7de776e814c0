#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcbnav/config.hpp"
#include "mcbnav/eval.hpp"
#include "mcbnav/trainer.hpp"

namespace mcbnav::experiment {

/// Root for run directories: $MCBNAV_RUN_ROOT, else "runs".
std::string run_root();

/// <root>/<name>/<method label>/seed_<seed>
std::string run_dir_for(const std::string& root, const ExperimentConfig& cfg, std::uint64_t seed);

struct TrainOptions {
  std::string root;
  int jobs = 1;        // worker processes
  bool reuse = false;  // skip seeds whose completed run matches the config hash
  bool quiet = false;
};

/// Trains every configured seed; returns the run directories in seed order.
/// Throws std::runtime_error if any worker fails.
std::vector<std::string> train_all(const ExperimentConfig& cfg, const TrainOptions& opts);

/// Strict evaluation of one checkpoint file.
eval::EvalResult evaluate_checkpoint(const std::string& checkpoint, const ExperimentConfig& cfg,
                                     const world::WorldMap& map,
                                     const std::vector<world::Scenario>& tasks);

struct AblationGrid {
  std::vector<int> budgets{2, 3, 5, 10, 50};
  /// Pose-filter thresholds in degrees; nullopt is the unfiltered setting.
  std::vector<std::optional<double>> taus{std::nullopt, 0.5, 1.0, 2.0, 3.0, 10.0};
};

struct AblationCell {
  int budget = 0;
  std::optional<double> tau_deg;
  std::vector<double> final_sr;  // per seed
  replay::CollisionStats pooled;
  double mean_final_sr() const;
};

/// Max minus min over budgets of the seed-mean final SR, per filter setting.
struct SrRange {
  std::optional<double> tau_deg;
  double range = 0.0;
};

std::vector<SrRange> sr_ranges(const std::vector<AblationCell>& cells);

/// Config for one grid cell derived from a base config.
ExperimentConfig cell_config(const ExperimentConfig& base, int budget, std::optional<double> tau_deg);

/// Trains (or reuses) every cell and writes ablation_cells.csv,
/// sr_range.csv and replay_stats.csv under <root>/<name>/ablation.
std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const AblationGrid& grid,
                                       const TrainOptions& opts);

/// Consolidates run directories into one deterministic bundle.
struct ExportReport {
  std::size_t series = 0;
  std::vector<std::string> gaps;
};
ExportReport export_bundle(const std::vector<std::string>& run_dirs, const std::string& out_dir);

}  // namespace mcbnav::experiment
