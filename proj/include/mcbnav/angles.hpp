#pragma once

#include <numbers>

namespace mcbnav {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi]. -pi maps to +pi.
double normalize_angle(double angle);

/// Absolute wrapped difference |atan2(sin(a - b), cos(a - b))|, in [0, pi].
double angle_distance(double a, double b);

}  // namespace mcbnav
