#include "attack_alloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attack_alloc/parallel.hpp"

namespace attack_alloc {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: empty range");
  // Accept draws below the largest multiple of n.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

Channel Channel::from_model(const SystemModeld& m, const SteadyStated& steady, int precompute) {
  Channel c;
  c.eps = m.eps;
  c.eps_attacked = m.eps_attacked;
  c.weight = m.weight;
  c.traces = trace_sequence(steady, m, std::max(precompute, 1));
  c.model = m;
  c.steady = steady;
  return c;
}

double Channel::trace(int j) const {
  if (j >= 0 && j < static_cast<int>(traces.size())) return traces[static_cast<std::size_t>(j)];
  return trace_at(steady, model, j);
}

void step_channels(std::span<int> tau, std::span<const int> attack,
                   std::span<const Channel> channels, Rng& rng, int clamp) {
  if (tau.size() != channels.size())
    throw std::invalid_argument("step_channels: one holding time per channel");
  auto a = attack.begin();
  for (std::size_t i = 0; i < tau.size(); ++i) {
    // attack is sorted, so a single forward scan suffices
    const bool attacked = a != attack.end() && static_cast<std::size_t>(*a) == i;
    if (attacked) ++a;
    const double p = attacked ? channels[i].eps_attacked : channels[i].eps;
    if (uniform01(rng) < p)
      tau[i] = 0;
    else if (clamp < 0 || tau[i] < clamp)
      ++tau[i];
  }
}

std::vector<int> myopic_action(std::span<const int> tau, int n) {
  std::vector<int> order(tau.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](int x, int y) {
    return tau[static_cast<std::size_t>(x)] != tau[static_cast<std::size_t>(y)]
               ? tau[static_cast<std::size_t>(x)] > tau[static_cast<std::size_t>(y)]
               : x < y;
  });
  order.resize(static_cast<std::size_t>(n));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> index_action(std::span<const IndexTable> tables, std::span<const int> tau,
                              int n) {
  if (tables.size() != tau.size())
    throw std::invalid_argument("index_action: one index table per channel");
  std::vector<IndexKey> keys;
  keys.reserve(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) keys.push_back(index_key(tables[i], tau[i]));
  std::vector<int> order(tau.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](int x, int y) {
    const auto& kx = keys[static_cast<std::size_t>(x)];
    const auto& ky = keys[static_cast<std::size_t>(y)];
    return kx != ky ? kx > ky : x < y;
  });
  order.resize(static_cast<std::size_t>(n));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<int> random_action(int m, int n, Rng& rng) {
  if (n < 0 || n > m) throw std::invalid_argument("random_action: need 0 <= n <= m");
  // Partial Fisher-Yates: the first n slots are a uniform n-subset.
  std::vector<int> pool(static_cast<std::size_t>(m));
  std::iota(pool.begin(), pool.end(), 0);
  for (int k = 0; k < n; ++k) {
    const auto pick = k + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(m - k)));
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick)]);
  }
  pool.resize(static_cast<std::size_t>(n));
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<int> TabularPolicy::select(std::span<const int> tau, Rng&) const {
  if (static_cast<int>(tau.size()) != table_.num_systems)
    throw std::invalid_argument("TabularPolicy: wrong number of channels");
  std::size_t f = 0;
  for (int i = table_.num_systems - 1; i >= 0; --i)
    f = f * static_cast<std::size_t>(table_.base()) +
        static_cast<std::size_t>(std::min(tau[static_cast<std::size_t>(i)], table_.trunc));
  return attack_indices(table_.actions[f]);
}

std::unique_ptr<Policy> tabular_policy(const SolveResult& result) {
  return std::make_unique<TabularPolicy>(result.policy);
}

std::vector<std::uint64_t> default_seeds(int count) {
  std::vector<std::uint64_t> s(static_cast<std::size_t>(std::max(count, 0)));
  std::iota(s.begin(), s.end(), std::uint64_t{1});
  return s;
}

namespace {

constexpr std::uint64_t kPolicyStreamSalt = 0x9E3779B97F4A7C15ull;

double run_path(std::span<const Channel> channels, int budget, const Policy& policy,
                const SimConfig& cfg, std::uint64_t seed) {
  Rng channel_rng(seed);
  Rng policy_rng(seed ^ kPolicyStreamSalt);
  std::vector<int> tau(channels.size(), 0);
  double total = 0.0;
  for (long long k = 1; k <= cfg.horizon; ++k) {
    const auto attack = policy.select(tau, policy_rng);
    if (static_cast<int>(attack.size()) != budget)
      throw std::logic_error("policy '" + policy.name() + "' returned " +
                             std::to_string(attack.size()) + " channels, expected " +
                             std::to_string(budget));
    step_channels(tau, attack, channels, channel_rng, cfg.clamp);
    if (k > cfg.burn_in) {
      double r = 0.0;
      for (std::size_t i = 0; i < channels.size(); ++i)
        r += channels[i].weight * channels[i].trace(tau[i]);
      total += r;
    }
  }
  return total / static_cast<double>(cfg.horizon - cfg.burn_in);
}

}  // namespace

SimReport evaluate_policy(std::span<const Channel> channels, int budget, const Policy& policy,
                          const SimConfig& cfg) {
  if (cfg.horizon <= cfg.burn_in || cfg.burn_in < 0)
    throw std::invalid_argument("evaluate_policy: need horizon > burn_in >= 0");
  if (cfg.seeds.empty()) throw std::invalid_argument("evaluate_policy: no seeds");
  if (budget < 1 || budget > static_cast<int>(channels.size()))
    throw std::invalid_argument("evaluate_policy: budget outside [1, M]");

  SimReport rep;
  rep.policy = policy.name();
  rep.horizon = cfg.horizon;
  rep.burn_in = cfg.burn_in;
  rep.clamp = cfg.clamp;
  rep.seeds = cfg.seeds;
  rep.per_seed_means.assign(cfg.seeds.size(), 0.0);
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k)
      rep.per_seed_means[k] = run_path(channels, budget, policy, cfg, cfg.seeds[k]);
  });

  const auto n = static_cast<double>(rep.per_seed_means.size());
  double sum = 0.0;
  for (double v : rep.per_seed_means) sum += v;
  rep.mean_reward = sum / n;
  if (rep.per_seed_means.size() > 1) {
    double ss = 0.0;
    for (double v : rep.per_seed_means) ss += (v - rep.mean_reward) * (v - rep.mean_reward);
    rep.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  return rep;
}

}  // namespace attack_alloc
