#include "mcbnav/angles.hpp"

#include <cmath>

namespace mcbnav {

double normalize_angle(double angle) {
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -kPi) wrapped += kTwoPi;
  if (wrapped > kPi) wrapped -= kTwoPi;
  return wrapped;
}

double angle_distance(double a, double b) {
  const double diff = a - b;
  return std::abs(std::atan2(std::sin(diff), std::cos(diff)));
}

}  // namespace mcbnav
