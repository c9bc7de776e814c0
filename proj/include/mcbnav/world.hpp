#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcbnav/angles.hpp"

namespace mcbnav::world {

using Vec2 = Eigen::Vector2d;

struct Bounds {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
};

/// Convex polygon with counter-clockwise vertex order.
struct Polygon {
  std::vector<Vec2> vertices;
};

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Static obstacle geometry. Immutable once constructed; safe to share across
/// threads. The outer bounds act as walls.
class WorldMap {
 public:
  /// Validates geometry: bounds non-degenerate, circles positive, polygons
  /// convex with non-zero area, every obstacle inside the bounds. Polygons
  /// given clockwise are reversed. Throws MapError.
  WorldMap(std::string name, Bounds bounds, std::vector<Circle> circles,
           std::vector<Polygon> polygons, double margin);

  const std::string& name() const { return name_; }
  const Bounds& bounds() const { return bounds_; }
  const std::vector<Circle>& circles() const { return circles_; }
  const std::vector<Polygon>& polygons() const { return polygons_; }
  double margin() const { return margin_; }

  /// Signed distance from a point to the nearest obstacle surface or wall.
  /// Negative inside an obstacle or outside the bounds.
  double clearance(const Vec2& p) const;

  /// Distance along a unit direction to the first obstacle or wall surface,
  /// or +infinity if nothing is hit. Origin is assumed to lie in free space.
  double ray_distance(const Vec2& origin, const Vec2& dir) const;

  /// True iff p lies inside (or on) an obstacle or outside the bounds.
  bool occupied(const Vec2& p) const;

 private:
  std::string name_;
  Bounds bounds_;
  std::vector<Circle> circles_;
  std::vector<Polygon> polygons_;
  double margin_;
};

/// Heading is kept in (-pi, pi].
struct RobotPose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const RobotPose&) const = default;
};

struct Action {
  double v = 0.0;
  double w = 0.0;

  bool operator==(const Action&) const = default;
};

struct ActionLimits {
  double v_min = 0.0;
  double v_max = 0.5;
  double w_min = -kPi / 2.0;
  double w_max = kPi / 2.0;

  bool contains(const Action& a) const {
    return a.v >= v_min && a.v <= v_max && a.w >= w_min && a.w <= w_max;
  }
  Action clamp(const Action& a) const;
};

struct LidarConfig {
  int beams = 24;
  double fov = deg_to_rad(270.0);
  double max_range = 6.0;

  /// Angle between adjacent beams. A full-circle fov spaces beams 2pi/m apart
  /// so the first and last beam do not coincide.
  double increment() const;
  /// Body-frame angle of beam j; beam 0 is the leftmost (most counter-clockwise).
  double beam_angle(int j) const;
};

struct LidarScan {
  std::vector<double> ranges;
  double max_range = 0.0;
};

struct Scenario {
  RobotPose start;
  Vec2 goal = Vec2::Zero();
  std::string map_ref;
};

struct SimOutcome {
  RobotPose next_pose;
  bool collided = false;
  bool goal_reached = false;
  LidarScan scan;
};

struct SimConfig {
  double dt = 0.2;
  double robot_radius = 0.17;
  double goal_radius = 0.3;
  int substeps = 10;
  /// Bisection refinements used to locate the first contact inside a substep.
  /// 0 keeps the last collision-free substep pose.
  int contact_refinements = 0;
  LidarConfig lidar;
};

struct ScenarioConfig {
  double min_goal_distance = 2.0;
  double max_goal_distance = 1e9;
  int max_attempts = 10000;
};

/// Exact-arc unicycle integration for a constant (v, w) over dt.
RobotPose step_dynamics(const RobotPose& pose, const Action& action, double dt);

LidarScan raycast_scan(const WorldMap& map, const RobotPose& pose, const LidarConfig& cfg);

/// True iff the robot disc of the given radius intersects an obstacle or wall.
bool check_collision(const WorldMap& map, const RobotPose& pose, double radius);

/// Integrates one control period with substepping. Motion stops at first
/// contact (no penetration) with the commanded heading change still applied;
/// collision is checked before goal entry at every substep.
SimOutcome advance(const WorldMap& map, const RobotPose& pose, const Action& action,
                   const Vec2& goal, const SimConfig& cfg);

/// Rejection-samples a start pose and goal that are free at radius + margin
/// and at least min_goal_distance apart. Throws SamplingError past the attempt cap.
Scenario sample_scenario(const WorldMap& map, std::mt19937_64& rng, double robot_radius,
                         const ScenarioConfig& cfg = {});

struct ClutterConfig {
  double width = 8.0;
  double height = 8.0;
  int circles = 8;
  int boxes = 6;
  double min_size = 0.25;
  double max_size = 0.55;
  /// Required free gap between generated obstacles.
  double min_gap = 0.6;
  double margin = 0.05;
};

/// Procedural cluttered map: randomly placed pillars and rotated boxes with a
/// guaranteed pairwise gap. Deterministic in the seed.
WorldMap generate_cluttered_map(const std::string& name, std::uint64_t seed,
                                const ClutterConfig& cfg = {});

}  // namespace mcbnav::world
