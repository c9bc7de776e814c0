#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcbnav/config.hpp"
#include "mcbnav/eval.hpp"
#include "mcbnav/replay.hpp"
#include "mcbnav/sac.hpp"

namespace mcbnav::experiment {

/// Independent generator seeds derived from one master seed.
struct SeedStreams {
  std::uint64_t scenario;
  std::uint64_t policy;
  std::uint64_t sampler;
  std::uint64_t init;
};

/// splitmix64-based stream splitting; stream ids are fixed constants.
SeedStreams split_seed(std::uint64_t master);

struct CheckpointRecord {
  eval::CurvePoint point;
  replay::CollisionStats stats;
};

struct RunResult {
  std::uint64_t seed = 0;
  std::string method;
  std::string config_hash;
  std::vector<CheckpointRecord> checkpoints;
  replay::CollisionStats stats;
  std::int64_t episodes = 0;
  std::vector<eval::TaskRecord> final_tasks;

  eval::LearningCurve curve() const;
};

struct TrainerOptions {
  /// Empty: nothing is written to disk.
  std::string run_dir;
  /// Called after every evaluation checkpoint.
  std::function<void(const CheckpointRecord&)> on_checkpoint;
};

/// Runs the collision-budget training loop for one seed: sample, step, build
/// and admit the transition, update once per step after warmup, reset per the
/// episode manager, and evaluate every eval_every steps in strict mode.
RunResult train_seed(const ExperimentConfig& cfg, std::uint64_t seed, const TrainerOptions& opts = {});

/// Deterministic mean-action policy over fixed parameters.
eval::Policy make_policy(const sac::SacParams& params, const sac::SacConfig& cfg);

/// Loads the metrics and statistics written by a completed run directory.
RunResult read_run(const std::string& run_dir);

/// True iff run_dir holds a completed run whose config hash equals `hash`.
bool run_complete(const std::string& run_dir, const std::string& hash);

std::string metrics_csv_header();
std::string metrics_csv_row(const eval::CurvePoint& p, std::uint64_t seed,
                            const std::string& method, int budget, double tau_deg,
                            const std::string& hash);

}  // namespace mcbnav::experiment
