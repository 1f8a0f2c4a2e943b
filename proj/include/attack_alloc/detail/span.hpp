#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace attack_alloc::detail {

/// Span of next - prev, ignoring per-state differences below the
/// floating-point resolution of that state's own magnitudes.
inline double resolved_span(const Eigen::VectorXd& next, const Eigen::VectorXd& prev) {
  constexpr double kUlps = 16.0 * std::numeric_limits<double>::epsilon();
  double hi = -std::numeric_limits<double>::infinity();
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index s = 0; s < next.size(); ++s) {
    const double d = next[s] - prev[s];
    const double slack = kUlps * (std::abs(next[s]) + std::abs(prev[s]));
    hi = std::max(hi, d - slack);
    lo = std::min(lo, d + slack);
  }
  return std::max(0.0, hi - lo);
}

}  // namespace attack_alloc::detail
