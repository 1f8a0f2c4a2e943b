#pragma once

// Monte Carlo evaluation of attack policies on M memoryless packet-dropping
// channels.
//
// Each seed owns two mt19937_64 streams: one for channel arrivals and one for
// randomized policies. Arrival draws use the top 53 bits of a raw output as a
// uniform double and subsets use rejection-sampled integers, so results do not
// depend on the standard library's distribution implementations.

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "attack_alloc/index.hpp"
#include "attack_alloc/mdp.hpp"
#include "attack_alloc/model.hpp"

namespace attack_alloc {

inline constexpr const char* kRngId = "mt19937_64+u53+rejection/v1";

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
double uniform01(Rng& rng);
/// Uniform integer in [0, n) by rejection.
std::uint64_t uniform_below(Rng& rng, std::uint64_t n);

struct Channel {
  double eps = 1.0;
  double eps_attacked = 0.0;
  double weight = 1.0;
  std::vector<double> traces;  // precomputed Tr(h^j(P_hat))
  SystemModeld model;
  SteadyStated steady;

  static Channel from_model(const SystemModeld& m, const SteadyStated& steady,
                            int precompute = 256);
  /// Tr(h^j(P_hat)), extending past the precomputed range on demand.
  double trace(int j) const;
};

/// One channel draw per system. Attacked systems (indices in `attack`) arrive
/// with eps_attacked, the rest with eps; arrival resets the holding time to 0,
/// otherwise it grows by one, capped at `clamp` when clamp >= 0.
void step_channels(std::span<int> tau, std::span<const int> attack,
                   std::span<const Channel> channels, Rng& rng, int clamp = -1);

/// Indices of the n largest holding times, ties to the smaller index; sorted.
std::vector<int> myopic_action(std::span<const int> tau, int n);
/// Indices of the n largest index keys, ties to the smaller index; sorted.
std::vector<int> index_action(std::span<const IndexTable> tables, std::span<const int> tau,
                              int n);
/// Uniform n-subset of {0..m-1}; sorted.
std::vector<int> random_action(int m, int n, Rng& rng);

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Sorted attack set for holding times tau. Must be safe to call
  /// concurrently; randomness may only come from `rng`.
  virtual std::vector<int> select(std::span<const int> tau, Rng& rng) const = 0;
};

class MyopicPolicy final : public Policy {
 public:
  explicit MyopicPolicy(int budget) : budget_(budget) {}
  std::string name() const override { return "myopic"; }
  std::vector<int> select(std::span<const int> tau, Rng&) const override {
    return myopic_action(tau, budget_);
  }

 private:
  int budget_;
};

class IndexPolicy final : public Policy {
 public:
  IndexPolicy(std::vector<IndexTable> tables, int budget)
      : tables_(std::move(tables)), budget_(budget) {}
  std::string name() const override { return "index"; }
  std::vector<int> select(std::span<const int> tau, Rng&) const override {
    return index_action(tables_, tau, budget_);
  }

 private:
  std::vector<IndexTable> tables_;
  int budget_;
};

class RandomPolicy final : public Policy {
 public:
  RandomPolicy(int systems, int budget) : systems_(systems), budget_(budget) {}
  std::string name() const override { return "random"; }
  std::vector<int> select(std::span<const int>, Rng& rng) const override {
    return random_action(systems_, budget_, rng);
  }

 private:
  int systems_;
  int budget_;
};

/// Looks a solved policy up at holding times clamped to the table's grid.
class TabularPolicy final : public Policy {
 public:
  explicit TabularPolicy(PolicyTable table) : table_(std::move(table)) {}
  std::string name() const override { return "optimal"; }
  std::vector<int> select(std::span<const int> tau, Rng&) const override;

 private:
  PolicyTable table_;
};

std::unique_ptr<Policy> tabular_policy(const SolveResult& result);

struct SimConfig {
  long long horizon = 200000;
  long long burn_in = 1000;
  std::vector<std::uint64_t> seeds;
  int clamp = -1;  // cap on simulated holding times; negative for none
  int threads = 1;
};

/// 1..count.
std::vector<std::uint64_t> default_seeds(int count = 20);

struct SimReport {
  std::string policy;
  double mean_reward = 0.0;
  double stderr_ = 0.0;  // across seeds
  long long horizon = 0;
  long long burn_in = 0;
  int clamp = -1;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_means;
  std::string rng_id = kRngId;
};

/// Each seed starts from tau = 0; at step k the policy sees tau_{k-1}, the
/// channels are drawn, and sum_i w_i Tr(h^{tau_k}) is accumulated for k > burn_in.
/// Throws std::logic_error if the policy returns a set of the wrong size.
SimReport evaluate_policy(std::span<const Channel> channels, int budget, const Policy& policy,
                          const SimConfig& cfg);

}  // namespace attack_alloc
