#pragma once

// Single-channel subsidy relaxation and the index policy built from it.
//
// A virtual attacker that may attack one channel at every step earns a
// constant subsidy z on every step it refrains. The optimal rule is a
// threshold l(z): attack iff the holding time is at least l(z). The index
// o(j) is the subsidy at which attacking and not attacking at holding time j
// are equally attractive, i.e. thresholds j and j+1 earn the same average.

#include <string>
#include <vector>

#include "attack_alloc/model.hpp"

namespace attack_alloc {

/// Stationary probability of holding time 0 under the threshold-j rule:
/// 1 / [ (1 - (1-eps)^j) / eps + (1-eps)^j / eps_attacked ].
double v_stationary(double eps, double eps_attacked, int j);
inline double v_stationary(const SystemModeld& m, int j) {
  return v_stationary(m.eps, m.eps_attacked, j);
}

/// Relative gap |v(j)a(j) - v(j+1)a(j+1)| / (v(j)a(j)) between the unattacked
/// fractions of time under thresholds j and j+1, where a(j) = (1-(1-eps)^j)/eps.
/// Infinite at j = 0.
double index_conditioning(const SystemModeld& m, int j);

inline constexpr double kDefaultTailTol = 1e-12;

/// o(j) from the balance between thresholds j and j+1. Throws
/// NumericallyUnreliable when index_conditioning(j) is below the unit
/// roundoff, since the balance can then not be resolved in double precision.
double whittle_index(const SystemModeld& m, const SteadyStated& steady, int j,
                     double tail_tol = kDefaultTailTol);

struct IndexTable {
  std::vector<double> values;  // o(0..j_max)
  int j_max = -1;
  std::string model_id;
  bool monotone = true;  // values nondecreasing on [0, j_max]
};

/// o(j) for j = 0..j_cap, stopping before the first unreliable j.
IndexTable build_index_table(const SystemModeld& m, const SteadyStated& steady, int j_cap,
                             double tail_tol = kDefaultTailTol);

/// Ranking key of a channel at holding time tau. Holding times beyond j_max
/// reuse o(j_max); the holding time itself breaks ties.
struct IndexKey {
  double value;
  int tau;
  auto operator<=>(const IndexKey&) const = default;
};
IndexKey index_key(const IndexTable& table, int tau);

struct SubsidyArm {
  std::vector<double> traces;  // Tr(h^j(P_hat)), j = 0..trunc
  double eps = 1.0;
  double eps_attacked = 0.0;
  double subsidy = 0.0;
  int trunc = 1;

  static SubsidyArm from_model(const SystemModeld& m, const SteadyStated& steady,
                               double subsidy, int trunc);
};

struct SingleArmResult {
  double gain = 0.0;
  int threshold = 0;         // smallest attacked holding time; trunc+1 if none
  std::vector<bool> attack;  // per holding time 0..trunc
  int iterations = 0;
};

/// Relative value iteration on {0..trunc} x {attack, refrain}; ties go to
/// refraining. Throws StructureError if the optimal rule is not a threshold
/// and ConvergenceError on non-convergence.
SingleArmResult single_arm_solve(const SubsidyArm& arm, double tol = 1e-9,
                                 int max_iter = 1000000);

/// Exact average reward of the threshold-t rule on the clamped chain.
double threshold_policy_gain(const SubsidyArm& arm, int threshold);

/// Truncation at which the clamped single-arm chain reproduces the untruncated
/// index to about 1e-10 relative for holding times up to j.
int default_oracle_trunc(const SystemModeld& m, int j);

/// Subsidy where the optimal threshold crosses from <= j to > j, found by
/// bisection on z with single_arm_solve; the bracket starts at
/// [0, 2 Tr(h^trunc(P_hat))] and widens geometrically when needed.
double index_oracle(const SystemModeld& m, const SteadyStated& steady, int j, int trunc,
                    double tol = 1e-7);

struct IndexabilityWitness {
  double z_low;
  double z_high;
  int j;  // refrains at z_low but attacks at z_high
};

struct IndexabilityReport {
  bool pass = true;
  std::vector<double> z_grid;
  std::vector<int> thresholds;
  std::vector<IndexabilityWitness> witnesses;
};

/// Passes iff the refrain region only grows along an ascending subsidy grid.
/// attack_tables[k][j] is the rule at z_grid[k] and holding time j.
IndexabilityReport check_indexability(const std::vector<double>& z_grid,
                                      const std::vector<std::vector<bool>>& attack_tables);

/// Solves the single-arm problem at every grid point, then check_indexability.
IndexabilityReport indexability_check(const SystemModeld& m, const SteadyStated& steady,
                                      const std::vector<double>& z_grid, int trunc,
                                      double tol = 1e-9);

}  // namespace attack_alloc
