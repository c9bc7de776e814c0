#pragma once

#include <vector>

#include <Eigen/Core>

#include "mcbnav/event.hpp"
#include "mcbnav/world.hpp"

namespace mcbnav::obs {

/// Observation before the lidar transform is applied. Replay stores this form
/// so that later changes of the transform offset reinterpret old experience.
struct RawObservation {
  std::vector<double> ranges;  // raw lidar readings, meters
  double goal_distance = 0.0;
  double goal_bearing = 0.0;   // body frame, (-pi, pi]
  double v = 0.0;
  double w = 0.0;

  bool operator==(const RawObservation&) const = default;
};

/// [l_1 .. l_m, goal distance, goal bearing, v, w] with l_j the transformed
/// lidar values.
using StateVector = Eigen::VectorXd;

struct TransformConfig {
  /// Minimum allowed gap between a reading and the offset.
  double epsilon = 0.05;
};

struct TransformResult {
  double value = 0.0;
  bool clamped = false;
};

/// 1 / (reading - offset). The denominator is clamped to epsilon and flagged
/// if it would fall below it.
TransformResult reciprocal_transform(double reading, double offset, const TransformConfig& cfg = {});

RawObservation observe(const world::LidarScan& scan, const world::RobotPose& pose,
                       const world::Vec2& goal, const world::Action& velocities);

/// Writes the state vector of `raw` into `out` (length m + 4). Returns the
/// number of clamped lidar entries.
int write_state(const RawObservation& raw, double offset, const TransformConfig& cfg,
                Eigen::Ref<Eigen::VectorXd> out);

StateVector to_state_vector(const RawObservation& raw, double offset,
                            const TransformConfig& cfg = {});

StateVector build_observation(const world::LidarScan& scan, const world::RobotPose& pose,
                              const world::Vec2& goal, const world::Action& velocities,
                              double offset, const TransformConfig& cfg = {});

inline int state_dim(int beams) { return beams + 4; }

struct RewardParams {
  double success = 10.0;
  double collision = -10.0;
  double progress_scale = 5.0;  // per meter of goal-distance reduction
};

double compute_reward(EventKind event, double goal_distance, double next_goal_distance,
                      const RewardParams& params = {});

}  // namespace mcbnav::obs
