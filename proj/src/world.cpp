#include "mcbnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

namespace mcbnav::world {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

double signed_area(const std::vector<Vec2>& v) {
  double area = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    area += cross(v[i], v[(i + 1) % v.size()]);
  }
  return 0.5 * area;
}

// Assumes counter-clockwise order.
bool inside_convex(const Polygon& poly, const Vec2& p) {
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (cross(v[(i + 1) % v.size()] - v[i], p - v[i]) < 0.0) return false;
  }
  return true;
}

double polygon_signed_distance(const Polygon& poly, const Vec2& p) {
  const auto& v = poly.vertices;
  double dist = kInf;
  for (std::size_t i = 0; i < v.size(); ++i) {
    dist = std::min(dist, segment_distance(p, v[i], v[(i + 1) % v.size()]));
  }
  return inside_convex(poly, p) ? -dist : dist;
}

double ray_circle(const Vec2& o, const Vec2& d, const Circle& c) {
  const Vec2 oc = o - c.center;
  const double b = oc.dot(d);
  const double cc = oc.squaredNorm() - c.radius * c.radius;
  if (cc <= 0.0) return 0.0;
  const double disc = b * b - cc;
  if (disc < 0.0) return kInf;
  const double t = -b - std::sqrt(disc);
  return t >= 0.0 ? t : kInf;
}

double ray_segment(const Vec2& o, const Vec2& d, const Vec2& a, const Vec2& b) {
  const Vec2 e = b - a;
  const double denom = cross(d, e);
  if (std::abs(denom) < 1e-15) return kInf;
  const Vec2 ao = a - o;
  const double t = cross(ao, e) / denom;
  const double u = cross(ao, d) / denom;
  if (t < 0.0 || u < 0.0 || u > 1.0) return kInf;
  return t;
}

double ray_bounds(const Vec2& o, const Vec2& d, const Bounds& b) {
  double t = kInf;
  if (d.x() > 0.0) t = std::min(t, (b.max_x - o.x()) / d.x());
  if (d.x() < 0.0) t = std::min(t, (b.min_x - o.x()) / d.x());
  if (d.y() > 0.0) t = std::min(t, (b.max_y - o.y()) / d.y());
  if (d.y() < 0.0) t = std::min(t, (b.min_y - o.y()) / d.y());
  return std::max(t, 0.0);
}

}  // namespace

WorldMap::WorldMap(std::string name, Bounds bounds, std::vector<Circle> circles,
                   std::vector<Polygon> polygons, double margin)
    : name_(std::move(name)),
      bounds_(bounds),
      circles_(std::move(circles)),
      polygons_(std::move(polygons)),
      margin_(margin) {
  if (!(bounds_.max_x > bounds_.min_x) || !(bounds_.max_y > bounds_.min_y)) {
    throw MapError("map bounds are degenerate");
  }
  if (!(margin_ >= 0.0)) throw MapError("free-space margin must be non-negative");
  for (std::size_t i = 0; i < circles_.size(); ++i) {
    const Circle& c = circles_[i];
    if (!(c.radius > 0.0) || !c.center.allFinite()) {
      throw MapError("circle " + std::to_string(i) + " has invalid geometry");
    }
    if (c.center.x() - c.radius < bounds_.min_x || c.center.x() + c.radius > bounds_.max_x ||
        c.center.y() - c.radius < bounds_.min_y || c.center.y() + c.radius > bounds_.max_y) {
      throw MapError("circle " + std::to_string(i) + " lies outside the map bounds");
    }
  }
  for (std::size_t i = 0; i < polygons_.size(); ++i) {
    auto& v = polygons_[i].vertices;
    const std::string label = "polygon " + std::to_string(i);
    if (v.size() < 3) throw MapError(label + " needs at least 3 vertices");
    for (const Vec2& p : v) {
      if (!p.allFinite()) throw MapError(label + " has a non-finite vertex");
      if (!bounds_.contains(p)) throw MapError(label + " lies outside the map bounds");
    }
    const double area = signed_area(v);
    if (std::abs(area) < 1e-12) throw MapError(label + " has zero area");
    if (area < 0.0) std::reverse(v.begin(), v.end());
    for (std::size_t k = 0; k < v.size(); ++k) {
      const Vec2& a = v[k];
      const Vec2& b = v[(k + 1) % v.size()];
      const Vec2& c = v[(k + 2) % v.size()];
      if (cross(b - a, c - b) < -1e-12) throw MapError(label + " is not convex");
    }
  }
}

double WorldMap::clearance(const Vec2& p) const {
  double d = std::min({p.x() - bounds_.min_x, bounds_.max_x - p.x(), p.y() - bounds_.min_y,
                       bounds_.max_y - p.y()});
  for (const Circle& c : circles_) d = std::min(d, (p - c.center).norm() - c.radius);
  for (const Polygon& poly : polygons_) d = std::min(d, polygon_signed_distance(poly, p));
  return d;
}

double WorldMap::ray_distance(const Vec2& origin, const Vec2& dir) const {
  double t = ray_bounds(origin, dir, bounds_);
  for (const Circle& c : circles_) t = std::min(t, ray_circle(origin, dir, c));
  for (const Polygon& poly : polygons_) {
    if (inside_convex(poly, origin)) return 0.0;
    const auto& v = poly.vertices;
    for (std::size_t i = 0; i < v.size(); ++i) {
      t = std::min(t, ray_segment(origin, dir, v[i], v[(i + 1) % v.size()]));
    }
  }
  return t;
}

bool WorldMap::occupied(const Vec2& p) const { return clearance(p) <= 0.0; }

Action ActionLimits::clamp(const Action& a) const {
  return {std::clamp(a.v, v_min, v_max), std::clamp(a.w, w_min, w_max)};
}

double LidarConfig::increment() const {
  if (beams <= 1) return 0.0;
  if (fov >= kTwoPi - 1e-12) return kTwoPi / beams;
  return fov / (beams - 1);
}

double LidarConfig::beam_angle(int j) const {
  if (beams <= 1) return 0.0;
  return 0.5 * std::min(fov, kTwoPi) - j * increment();
}

RobotPose step_dynamics(const RobotPose& pose, const Action& action, double dt) {
  const double dtheta = action.w * dt;
  RobotPose next = pose;
  if (std::abs(dtheta) < 1e-12) {
    next.x += action.v * dt * std::cos(pose.theta);
    next.y += action.v * dt * std::sin(pose.theta);
  } else {
    const double r = action.v / action.w;
    next.x += r * (std::sin(pose.theta + dtheta) - std::sin(pose.theta));
    next.y -= r * (std::cos(pose.theta + dtheta) - std::cos(pose.theta));
  }
  next.theta = normalize_angle(pose.theta + dtheta);
  return next;
}

LidarScan raycast_scan(const WorldMap& map, const RobotPose& pose, const LidarConfig& cfg) {
  LidarScan scan;
  scan.max_range = cfg.max_range;
  scan.ranges.resize(static_cast<std::size_t>(cfg.beams));
  const Vec2 origin = pose.position();
  for (int j = 0; j < cfg.beams; ++j) {
    const double angle = pose.theta + cfg.beam_angle(j);
    const Vec2 dir(std::cos(angle), std::sin(angle));
    const double hit = map.ray_distance(origin, dir);
    // Readings stay strictly positive even if the origin touches a surface.
    scan.ranges[static_cast<std::size_t>(j)] = std::clamp(hit, 1e-6, cfg.max_range);
  }
  return scan;
}

bool check_collision(const WorldMap& map, const RobotPose& pose, double radius) {
  return map.clearance(pose.position()) < radius;
}

SimOutcome advance(const WorldMap& map, const RobotPose& pose, const Action& action,
                   const Vec2& goal, const SimConfig& cfg) {
  SimOutcome out;
  out.next_pose = step_dynamics(pose, action, cfg.dt);
  const int n = std::max(1, cfg.substeps);
  for (int k = 1; k <= n; ++k) {
    const double frac = static_cast<double>(k) / n;
    const RobotPose sub = step_dynamics(pose, action, frac * cfg.dt);
    if (check_collision(map, sub, cfg.robot_radius)) {
      double lo = static_cast<double>(k - 1) / n;
      double hi = frac;
      for (int i = 0; i < cfg.contact_refinements; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (check_collision(map, step_dynamics(pose, action, mid * cfg.dt), cfg.robot_radius)) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      const RobotPose contact = step_dynamics(pose, action, lo * cfg.dt);
      out.next_pose = {contact.x, contact.y, normalize_angle(pose.theta + action.w * cfg.dt)};
      out.collided = true;
      break;
    }
    if ((sub.position() - goal).norm() <= cfg.goal_radius) {
      out.next_pose = sub;
      out.goal_reached = true;
      break;
    }
  }
  out.scan = raycast_scan(map, out.next_pose, cfg.lidar);
  return out;
}

Scenario sample_scenario(const WorldMap& map, std::mt19937_64& rng, double robot_radius,
                         const ScenarioConfig& cfg) {
  const double inset = robot_radius + map.margin();
  const Bounds& b = map.bounds();
  if (b.width() <= 2.0 * inset || b.height() <= 2.0 * inset) {
    throw SamplingError("map '" + map.name() + "' is too small for the robot");
  }
  std::uniform_real_distribution<double> ux(b.min_x + inset, b.max_x - inset);
  std::uniform_real_distribution<double> uy(b.min_y + inset, b.max_y - inset);
  std::uniform_real_distribution<double> uth(-kPi, kPi);

  auto free_point = [&](int& attempts) -> Vec2 {
    while (attempts < cfg.max_attempts) {
      ++attempts;
      const Vec2 p(ux(rng), uy(rng));
      if (map.clearance(p) >= inset) return p;
    }
    throw SamplingError("scenario sampling exceeded " + std::to_string(cfg.max_attempts) +
                        " attempts on map '" + map.name() + "'");
  };

  int attempts = 0;
  while (true) {
    const Vec2 start = free_point(attempts);
    const double theta = normalize_angle(uth(rng));
    const Vec2 goal = free_point(attempts);
    const double dist = (goal - start).norm();
    if (dist >= cfg.min_goal_distance && dist <= cfg.max_goal_distance) {
      return Scenario{{start.x(), start.y(), theta}, goal, map.name()};
    }
    if (attempts >= cfg.max_attempts) {
      throw SamplingError("no start/goal pair satisfies the distance constraints on map '" +
                          map.name() + "'");
    }
  }
}

WorldMap generate_cluttered_map(const std::string& name, std::uint64_t seed,
                                const ClutterConfig& cfg) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> usize(cfg.min_size, cfg.max_size);
  std::uniform_real_distribution<double> uangle(0.0, kPi);
  const Bounds bounds{0.0, 0.0, cfg.width, cfg.height};

  struct Placed {
    Vec2 center;
    double extent;
  };
  std::vector<Placed> placed;
  std::vector<Circle> circles;
  std::vector<Polygon> polygons;

  auto try_place = [&](double extent) -> std::optional<Vec2> {
    const double inset = extent + cfg.min_gap;
    if (cfg.width <= 2.0 * inset || cfg.height <= 2.0 * inset) return std::nullopt;
    std::uniform_real_distribution<double> ux(inset, cfg.width - inset);
    std::uniform_real_distribution<double> uy(inset, cfg.height - inset);
    for (int attempt = 0; attempt < 500; ++attempt) {
      const Vec2 c(ux(rng), uy(rng));
      const bool clear = std::all_of(placed.begin(), placed.end(), [&](const Placed& p) {
        return (p.center - c).norm() >= p.extent + extent + cfg.min_gap;
      });
      if (clear) return c;
    }
    return std::nullopt;
  };

  for (int i = 0; i < cfg.circles; ++i) {
    const double r = 0.5 * usize(rng);
    if (auto c = try_place(r)) {
      circles.push_back({*c, r});
      placed.push_back({*c, r});
    }
  }
  for (int i = 0; i < cfg.boxes; ++i) {
    const double w = usize(rng);
    const double h = usize(rng);
    const double angle = uangle(rng);
    const double extent = 0.5 * std::hypot(w, h);
    if (auto c = try_place(extent)) {
      const Vec2 ax(std::cos(angle), std::sin(angle));
      const Vec2 ay(-ax.y(), ax.x());
      Polygon box;
      for (auto [sx, sy] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}) {
        box.vertices.push_back(*c + 0.5 * sx * w * ax + 0.5 * sy * h * ay);
      }
      polygons.push_back(std::move(box));
      placed.push_back({*c, extent});
    }
  }
  return WorldMap(name, bounds, std::move(circles), std::move(polygons), cfg.margin);
}

}  // namespace mcbnav::world
