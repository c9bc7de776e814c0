#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "json.hpp"
#include "mcbnav/event.hpp"
#include "mcbnav/observation.hpp"
#include "mcbnav/world.hpp"

namespace mcbnav::eval {

/// Maps the current observation to a velocity command.
using Policy = std::function<world::Action(const obs::RawObservation&)>;

struct EvalConfig {
  world::SimConfig sim;
  int t_max = 200;
  /// Strict mode ends a trial at the first collision and counts it as failure.
  /// Otherwise collisions up to `budget` are local terminations.
  bool strict = true;
  int budget = 1;
  bool record_trajectories = true;
};

struct TaskRecord {
  EventKind outcome = EventKind::kTimeout;
  int steps = 0;
  int collisions = 0;
  double score = -1.0;
  double velocity_sum = 0.0;
  std::vector<world::RobotPose> trajectory;  // start pose first
};

struct EvalResult {
  double sr = 0.0;
  double av = 0.0;
  double ael = 0.0;
  double ans = 0.0;
  std::vector<TaskRecord> tasks;
};

/// 1 - 2 * steps / t_max on success, -1 otherwise.
double nav_score(bool success, int steps, int t_max);

/// Fixed, seed-derived task list; identical for every method compared.
std::vector<world::Scenario> make_task_set(const world::WorldMap& map, std::uint64_t seed,
                                           int count, double robot_radius,
                                           const world::ScenarioConfig& cfg = {});

TaskRecord run_task(const Policy& policy, const world::WorldMap& map,
                    const world::Scenario& task, const EvalConfig& cfg);

/// Runs every task once and aggregates in task order. AV averages the linear
/// velocity over all evaluation steps; AEL averages over all episodes.
EvalResult run_eval(const Policy& policy, const world::WorldMap& map,
                    const std::vector<world::Scenario>& tasks, const EvalConfig& cfg);

/// Recomputes the aggregates from per-task records.
void aggregate(EvalResult& result);

struct CurvePoint {
  std::int64_t step = 0;
  double sr = 0.0;
  double av = 0.0;
  double ael = 0.0;
  double ans = 0.0;
};

using LearningCurve = std::vector<CurvePoint>;

/// First checkpoint step whose SR reaches `threshold`.
std::optional<std::int64_t> steps_to_threshold(const LearningCurve& curve, double threshold);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Population standard deviation, matching seed-band plots.
MeanStd mean_std(const std::vector<double>& values);

double median(std::vector<double> values);

nlohmann::json task_to_json(const TaskRecord& task, std::size_t index);

}  // namespace mcbnav::eval
