#pragma once

// Executable checks of the structural properties of optimal attack policies
// and differential value functions on the truncated grid.

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "attack_alloc/mdp.hpp"

namespace attack_alloc {

struct StructureViolation {
  std::vector<int> coords;
  std::string message;
  double magnitude = 0.0;
};

struct StructureReport {
  bool pass = true;
  std::vector<StructureViolation> violations;
  /// M=2: for each j2, the smallest j1 at which channel 1 is attacked
  /// (trunc + 1 when never).
  std::vector<int> critical_curve;
  double worst_violation = 0.0;
};

/// True iff every prescribed action attacks exactly `budget` channels.
bool verify_exactly_n(const PolicyTable& policy, int budget);

/// Two channels, budget one: the attack-1 region is upward closed in j1 for
/// each j2 and the attack-2 region is upward closed in j2 for each j1.
StructureReport verify_threshold_structure(const PolicyTable& policy);

/// Any M: for each channel i and each fixed state of the other channels, the
/// set of j_i at which i is attacked is upward closed.
StructureReport verify_general_threshold(const PolicyTable& policy);

/// Two channels: q(s) <= q(s') whenever s <= s' componentwise, and
/// q(s) + q(s') >= q(s meet s') + q(s join s') for all pairs, up to
/// rel_slack * max|q|.
StructureReport verify_q_structure(const Eigen::VectorXd& q, int trunc,
                                   double rel_slack = 1e-6);

}  // namespace attack_alloc
