#include "mcbnav/observation.hpp"

#include <cmath>

#include "mcbnav/angles.hpp"

namespace mcbnav {

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (EventKind e : {EventKind::kNone, EventKind::kSuccess, EventKind::kCollision,
                      EventKind::kTimeout}) {
    if (to_string(e) == s) return e;
  }
  return std::nullopt;
}

namespace obs {

TransformResult reciprocal_transform(double reading, double offset, const TransformConfig& cfg) {
  const double gap = reading - offset;
  if (!(gap >= cfg.epsilon)) return {1.0 / cfg.epsilon, true};
  return {1.0 / gap, false};
}

RawObservation observe(const world::LidarScan& scan, const world::RobotPose& pose,
                       const world::Vec2& goal, const world::Action& velocities) {
  RawObservation raw;
  raw.ranges = scan.ranges;
  const world::Vec2 delta = goal - pose.position();
  raw.goal_distance = delta.norm();
  raw.goal_bearing = normalize_angle(std::atan2(delta.y(), delta.x()) - pose.theta);
  raw.v = velocities.v;
  raw.w = velocities.w;
  return raw;
}

int write_state(const RawObservation& raw, double offset, const TransformConfig& cfg,
                Eigen::Ref<Eigen::VectorXd> out) {
  const auto m = static_cast<Eigen::Index>(raw.ranges.size());
  int clamped = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const TransformResult t = reciprocal_transform(raw.ranges[static_cast<std::size_t>(j)], offset, cfg);
    out[j] = t.value;
    clamped += t.clamped ? 1 : 0;
  }
  out[m] = raw.goal_distance;
  out[m + 1] = raw.goal_bearing;
  out[m + 2] = raw.v;
  out[m + 3] = raw.w;
  return clamped;
}

StateVector to_state_vector(const RawObservation& raw, double offset, const TransformConfig& cfg) {
  StateVector s(state_dim(static_cast<int>(raw.ranges.size())));
  write_state(raw, offset, cfg, s);
  return s;
}

StateVector build_observation(const world::LidarScan& scan, const world::RobotPose& pose,
                              const world::Vec2& goal, const world::Action& velocities,
                              double offset, const TransformConfig& cfg) {
  return to_state_vector(observe(scan, pose, goal, velocities), offset, cfg);
}

double compute_reward(EventKind event, double goal_distance, double next_goal_distance,
                      const RewardParams& params) {
  switch (event) {
    case EventKind::kSuccess: return params.success;
    case EventKind::kCollision: return params.collision;
    default: return params.progress_scale * (goal_distance - next_goal_distance);
  }
}

}  // namespace obs
}  // namespace mcbnav
