#pragma once

// Truncated product-state average-reward MDP for attack allocation.
//
// A state holds the holding time of every channel, clamped to {0..trunc}, and
// is stored as a mixed-radix integer with channel 0 varying fastest. Actions
// are attack sets of exactly `budget` channels, kept as bit masks and listed
// in lexicographic order of their sorted index tuples.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "attack_alloc/model.hpp"

namespace attack_alloc {

using AttackSet = std::uint64_t;  // bit i set: channel i is attacked

std::vector<int> attack_indices(AttackSet set);
AttackSet attack_mask(std::span<const int> indices);
int attack_size(AttackSet set);

/// All attack sets of exactly n out of m channels, lexicographic order.
std::vector<AttackSet> exact_budget_actions(int m, int n);

/// Estimated bytes held by the solver's dense tables.
std::size_t solver_table_bytes(int num_systems, int trunc);

class MdpProblem {
 public:
  MdpProblem(std::vector<SystemModeld> models, std::vector<SteadyStated> steady,
             int budget, int trunc);

  int num_systems() const { return static_cast<int>(models_.size()); }
  int budget() const { return budget_; }
  int trunc() const { return trunc_; }
  int base() const { return trunc_ + 1; }
  std::size_t num_states() const { return num_states_; }
  std::size_t stride(int channel) const { return strides_[static_cast<std::size_t>(channel)]; }

  const std::vector<AttackSet>& actions() const { return actions_; }
  const SystemModeld& model(int i) const { return models_[static_cast<std::size_t>(i)]; }
  const SteadyStated& steady(int i) const { return steady_[static_cast<std::size_t>(i)]; }
  double eps(int i) const { return model(i).eps; }
  double eps_attacked(int i) const { return model(i).eps_attacked; }
  double weight(int i) const { return model(i).weight; }

  /// Tr(h_i^j(P_hat_i)) for 0 <= j <= trunc.
  double trace(int i, int j) const {
    return traces_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }

  /// r(s) for every flat state.
  const Eigen::VectorXd& rewards() const { return rewards_; }

 private:
  std::vector<SystemModeld> models_;
  std::vector<SteadyStated> steady_;
  int budget_;
  int trunc_;
  std::size_t num_states_;
  std::vector<std::size_t> strides_;
  std::vector<std::vector<double>> traces_;
  std::vector<AttackSet> actions_;
  Eigen::VectorXd rewards_;
};

struct StateIndex {
  std::vector<int> coords;
  std::size_t flat = 0;
};

std::size_t encode_state(const MdpProblem& problem, std::span<const int> coords);
std::vector<int> decode_state(const MdpProblem& problem, std::size_t flat);
StateIndex make_state(const MdpProblem& problem, std::span<const int> coords);

struct Transition {
  std::size_t state;
  double probability;
};

/// Product of the per-channel reset/advance kernels; a failed channel at
/// trunc stays at trunc.
std::vector<Transition> transition_distribution(const MdpProblem& problem,
                                                std::size_t state, AttackSet action);

/// Sum over channels of w_i * Tr(h_i^{j_i}(P_hat_i)).
double one_stage_reward(const MdpProblem& problem, std::size_t state);

/// Deterministic stationary policy over the truncated grid.
struct PolicyTable {
  int num_systems = 0;
  int trunc = 0;
  std::vector<AttackSet> actions;  // indexed by flat state

  int base() const { return trunc + 1; }
  std::size_t flat(std::span<const int> coords) const;
  AttackSet at(std::span<const int> coords) const { return actions[flat(coords)]; }
};

struct SolveResult {
  double gain = 0.0;
  Eigen::VectorXd q;  // q(origin) = 0
  PolicyTable policy;
  int iterations = 0;
  double span_at_exit = 0.0;
  int trunc = 0;
};

struct RviOptions {
  double tol = 1e-6;
  int max_iter = 100000;
  std::size_t reference_state = 0;
  int threads = 1;
};

/// Relative value iteration: J_n = r + max_a G(h_{n-1}, ., a), h_n = J_n - J_n(ref),
/// stopped when the span of J_n - h_{n-1} drops below tol. The span treats
/// differences within floating-point resolution of a state's own value as
/// zero. Throws ConvergenceError after max_iter sweeps.
SolveResult relative_value_iteration(const MdpProblem& problem, const RviOptions& opts = {});

/// max_s | q(s) - max_a { r(s) - gain + G(q, s, a) } |.
double bellman_residual(const MdpProblem& problem, const SolveResult& result,
                        int threads = 1);

/// Long-run average reward of a fixed policy on the truncated chain. Enumerates
/// 2^M successors per state, so intended for small problems.
double evaluate_policy_gain(const MdpProblem& problem, const PolicyTable& policy,
                            double tol = 1e-9, int max_iter = 100000);

}  // namespace attack_alloc
