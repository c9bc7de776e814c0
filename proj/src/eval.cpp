#include "mcbnav/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mcbnav/episode.hpp"

namespace mcbnav::eval {

double nav_score(bool success, int steps, int t_max) {
  if (!success) return -1.0;
  return 1.0 - 2.0 * static_cast<double>(steps) / static_cast<double>(t_max);
}

std::vector<world::Scenario> make_task_set(const world::WorldMap& map, std::uint64_t seed,
                                           int count, double robot_radius,
                                           const world::ScenarioConfig& cfg) {
  std::mt19937_64 rng(seed);
  std::vector<world::Scenario> tasks;
  tasks.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) tasks.push_back(world::sample_scenario(map, rng, robot_radius, cfg));
  return tasks;
}

TaskRecord run_task(const Policy& policy, const world::WorldMap& map,
                    const world::Scenario& task, const EvalConfig& cfg) {
  TaskRecord rec;
  world::RobotPose pose = task.start;
  world::Action velocities;
  world::LidarScan scan = world::raycast_scan(map, pose, cfg.sim.lidar);
  episode::EpisodeState state = episode::begin_episode(task);
  if (cfg.record_trajectories) rec.trajectory.push_back(pose);

  while (true) {
    const obs::RawObservation o = obs::observe(scan, pose, task.goal, velocities);
    const world::Action action = policy(o);
    const world::SimOutcome outcome = world::advance(map, pose, action, task.goal, cfg.sim);
    const EventKind event = episode::classify_event(outcome, state.t + 1, cfg.t_max);
    const auto [next, directive] = cfg.strict ? episode::strict_step(state, event, cfg.t_max)
                                              : episode::on_step(state, event, cfg.budget, cfg.t_max);
    state = next;
    pose = outcome.next_pose;
    scan = outcome.scan;
    velocities = action;
    rec.velocity_sum += action.v;
    if (cfg.record_trajectories) rec.trajectory.push_back(pose);
    if (directive.global_reset) {
      rec.outcome = event == EventKind::kSuccess ? EventKind::kSuccess
                    : directive.reason == episode::ResetReason::kTimeout ? EventKind::kTimeout
                                                                         : EventKind::kCollision;
      break;
    }
  }
  rec.steps = state.t;
  rec.collisions = state.collisions;
  rec.score = nav_score(rec.outcome == EventKind::kSuccess, rec.steps, cfg.t_max);
  return rec;
}

void aggregate(EvalResult& r) {
  const double n = static_cast<double>(r.tasks.size());
  if (r.tasks.empty()) {
    r.sr = r.av = r.ael = r.ans = 0.0;
    return;
  }
  double successes = 0.0;
  double velocity = 0.0;
  double steps = 0.0;
  double score = 0.0;
  for (const TaskRecord& t : r.tasks) {
    successes += t.outcome == EventKind::kSuccess ? 1.0 : 0.0;
    velocity += t.velocity_sum;
    steps += t.steps;
    score += t.score;
  }
  r.sr = successes / n;
  r.av = steps > 0.0 ? velocity / steps : 0.0;
  r.ael = steps / n;
  r.ans = score / n;
}

EvalResult run_eval(const Policy& policy, const world::WorldMap& map,
                    const std::vector<world::Scenario>& tasks, const EvalConfig& cfg) {
  EvalResult r;
  r.tasks.reserve(tasks.size());
  for (const world::Scenario& task : tasks) r.tasks.push_back(run_task(policy, map, task, cfg));
  aggregate(r);
  return r;
}

std::optional<std::int64_t> steps_to_threshold(const LearningCurve& curve, double threshold) {
  for (const CurvePoint& p : curve) {
    if (p.sr >= threshold) return p.step;
  }
  return std::nullopt;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return {mean, std::sqrt(var / n)};
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

nlohmann::json task_to_json(const TaskRecord& task, std::size_t index) {
  nlohmann::json traj = nlohmann::json::array();
  for (const world::RobotPose& p : task.trajectory) traj.push_back({p.x, p.y, p.theta});
  return {{"task", index},
          {"outcome", std::string(to_string(task.outcome))},
          {"steps", task.steps},
          {"score", task.score},
          {"trajectory", traj}};
}

}  // namespace mcbnav::eval
