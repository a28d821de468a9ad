#pragma once

#include <cmath>

namespace esrr {

// Canonical representative of a real number on T = R/Z, in [0, 1).
inline double torus_wrap(double v) {
  double r = v - std::floor(v);
  return r >= 1.0 ? 0.0 : r;
}

// Point on the 1-torus, stored canonically in [0, 1).
struct TorusPoint {
  double x{0.0};
  TorusPoint() = default;
  explicit TorusPoint(double v) : x(torus_wrap(v)) {}
};

// Geodesic distance on T, in [0, 0.5].
inline double torus_dist(TorusPoint a, TorusPoint b) {
  double d = std::abs(a.x - b.x);
  return std::min(d, 1.0 - d);
}

// Signed arc from `a` to `b` along the shorter way, in [-0.5, 0.5).
inline double torus_arc(TorusPoint a, TorusPoint b) {
  return torus_wrap(b.x - a.x + 0.5) - 0.5;
}

}  // namespace esrr
