#include "attack_alloc/mdp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "attack_alloc/errors.hpp"
#include "attack_alloc/detail/span.hpp"
#include "attack_alloc/parallel.hpp"

namespace attack_alloc {

std::vector<int> attack_indices(AttackSet set) {
  std::vector<int> out;
  for (int i = 0; set != 0; ++i, set >>= 1)
    if (set & 1u) out.push_back(i);
  return out;
}

AttackSet attack_mask(std::span<const int> indices) {
  AttackSet m = 0;
  for (int i : indices) {
    if (i < 0 || i >= 64) throw std::invalid_argument("attack index out of range");
    m |= AttackSet{1} << i;
  }
  return m;
}

int attack_size(AttackSet set) { return std::popcount(set); }

namespace {

void enumerate_actions(int i, int m, int remaining, AttackSet current,
                       std::vector<AttackSet>& out) {
  if (remaining == 0) {
    out.push_back(current);
    return;
  }
  if (m - i < remaining) return;
  // Including channel i before excluding it yields lexicographic order.
  enumerate_actions(i + 1, m, remaining - 1, current | (AttackSet{1} << i), out);
  enumerate_actions(i + 1, m, remaining, current, out);
}

std::size_t checked_pow(int base, int exp) {
  std::size_t n = 1;
  for (int k = 0; k < exp; ++k) {
    if (n > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(base))
      throw DomainError("state space size overflows");
    n *= static_cast<std::size_t>(base);
  }
  return n;
}

}  // namespace

std::vector<AttackSet> exact_budget_actions(int m, int n) {
  if (m < 1 || m > 63 || n < 1 || n > m)
    throw std::invalid_argument("need 1 <= budget <= systems <= 63");
  std::vector<AttackSet> out;
  enumerate_actions(0, m, n, 0, out);
  return out;
}

std::size_t solver_table_bytes(int num_systems, int trunc) {
  const double states = std::pow(static_cast<double>(trunc + 1), num_systems);
  // value, reward, next value, (M-1) traversal buffers, policy mask.
  const double per_state = 8.0 * (3 + std::max(num_systems - 1, 0)) + 8.0;
  const double bytes = states * per_state;
  if (bytes > static_cast<double>(std::numeric_limits<std::size_t>::max()))
    return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(bytes);
}

MdpProblem::MdpProblem(std::vector<SystemModeld> models, std::vector<SteadyStated> steady,
                       int budget, int trunc)
    : models_(std::move(models)), steady_(std::move(steady)), budget_(budget), trunc_(trunc) {
  const int m = static_cast<int>(models_.size());
  if (m == 0) throw std::invalid_argument("MdpProblem: no systems");
  if (steady_.size() != models_.size())
    throw std::invalid_argument("MdpProblem: one steady state per model required");
  if (budget_ < 1 || budget_ > m)
    throw std::invalid_argument("MdpProblem: budget must satisfy 1 <= N <= M");
  if (trunc_ < 1) throw std::invalid_argument("MdpProblem: truncation must be >= 1");

  num_states_ = checked_pow(base(), m);
  strides_.resize(static_cast<std::size_t>(m));
  std::size_t s = 1;
  for (int i = 0; i < m; ++i) {
    strides_[static_cast<std::size_t>(i)] = s;
    s *= static_cast<std::size_t>(base());
  }
  traces_.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i)
    traces_.push_back(trace_sequence(steady_[static_cast<std::size_t>(i)],
                                     models_[static_cast<std::size_t>(i)], base()));
  actions_ = exact_budget_actions(m, budget_);

  // Reward is separable: accumulate one channel at a time.
  rewards_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_states_));
  for (int i = 0; i < m; ++i) {
    const std::size_t st = strides_[static_cast<std::size_t>(i)];
    const double w = models_[static_cast<std::size_t>(i)].weight;
    const auto& tr = traces_[static_cast<std::size_t>(i)];
    for (std::size_t f = 0; f < num_states_; ++f) {
      const auto j = (f / st) % static_cast<std::size_t>(base());
      rewards_[static_cast<Eigen::Index>(f)] += w * tr[j];
    }
  }
}

std::size_t encode_state(const MdpProblem& problem, std::span<const int> coords) {
  if (static_cast<int>(coords.size()) != problem.num_systems())
    throw std::invalid_argument("encode_state: wrong number of coordinates");
  std::size_t flat = 0;
  for (int i = problem.num_systems() - 1; i >= 0; --i) {
    const int c = coords[static_cast<std::size_t>(i)];
    if (c < 0 || c > problem.trunc())
      throw std::out_of_range("encode_state: coordinate outside truncation");
    flat = flat * static_cast<std::size_t>(problem.base()) + static_cast<std::size_t>(c);
  }
  return flat;
}

std::vector<int> decode_state(const MdpProblem& problem, std::size_t flat) {
  if (flat >= problem.num_states()) throw std::out_of_range("decode_state: bad index");
  std::vector<int> coords(static_cast<std::size_t>(problem.num_systems()));
  for (auto& c : coords) {
    c = static_cast<int>(flat % static_cast<std::size_t>(problem.base()));
    flat /= static_cast<std::size_t>(problem.base());
  }
  return coords;
}

StateIndex make_state(const MdpProblem& problem, std::span<const int> coords) {
  StateIndex s;
  s.coords.assign(coords.begin(), coords.end());
  s.flat = encode_state(problem, coords);
  return s;
}

std::vector<Transition> transition_distribution(const MdpProblem& problem, std::size_t state,
                                                AttackSet action) {
  const auto coords = decode_state(problem, state);
  const int m = problem.num_systems();
  std::vector<Transition> out;
  out.reserve(std::size_t{1} << m);
  for (std::uint64_t outcome = 0; outcome < (std::uint64_t{1} << m); ++outcome) {
    double p = 1.0;
    std::size_t next = 0;
    for (int i = 0; i < m; ++i) {
      const bool attacked = (action >> i) & 1u;
      const double arrive = attacked ? problem.eps_attacked(i) : problem.eps(i);
      const bool arrived = (outcome >> i) & 1u;
      const int c = arrived ? 0 : std::min(coords[static_cast<std::size_t>(i)] + 1, problem.trunc());
      p *= arrived ? arrive : 1.0 - arrive;
      next += static_cast<std::size_t>(c) * problem.stride(i);
    }
    if (p == 0.0) continue;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const Transition& t) { return t.state == next; });
    if (it == out.end())
      out.push_back({next, p});
    else
      it->probability += p;
  }
  return out;
}

double one_stage_reward(const MdpProblem& problem, std::size_t state) {
  const auto coords = decode_state(problem, state);
  double r = 0.0;
  for (int i = 0; i < problem.num_systems(); ++i)
    r += problem.weight(i) * problem.trace(i, coords[static_cast<std::size_t>(i)]);
  return r;
}

std::size_t PolicyTable::flat(std::span<const int> coords) const {
  if (static_cast<int>(coords.size()) != num_systems)
    throw std::invalid_argument("PolicyTable: wrong number of coordinates");
  std::size_t f = 0;
  for (int i = num_systems - 1; i >= 0; --i) {
    const int c = coords[static_cast<std::size_t>(i)];
    if (c < 0 || c > trunc) throw std::out_of_range("PolicyTable: coordinate outside grid");
    f = f * static_cast<std::size_t>(base()) + static_cast<std::size_t>(c);
  }
  return f;
}

namespace {

// Expected-value operator for channel i with arrival probability p:
// out(s) = p * in(s | s_i = 0) + (1 - p) * in(s | s_i = min(s_i + 1, L)).
// Rows are (outer block, coordinate value) pairs of length `stride`.
struct ChannelOp {
  std::size_t stride;
  int base;
  double p;

  template <typename Sink>
  void run_rows(const double* in, std::size_t row_begin, std::size_t row_end, Sink&& sink) const {
    const auto ub = static_cast<std::size_t>(base);
    for (std::size_t row = row_begin; row < row_end; ++row) {
      const std::size_t c = row % ub;
      const std::size_t block = (row / ub) * stride * ub;
      const std::size_t dst = block + c * stride;
      const double* reset = in + block;
      const double* advance = in + block + std::min(c + 1, ub - 1) * stride;
      for (std::size_t k = 0; k < stride; ++k)
        sink(dst + k, p * reset[k] + (1.0 - p) * advance[k]);
    }
  }
};

class BellmanSweep {
 public:
  BellmanSweep(const MdpProblem& problem, int threads)
      : problem_(problem), threads_(std::max(threads, 1)) {
    const int m = problem.num_systems();
    buffers_.resize(static_cast<std::size_t>(std::max(m - 1, 0)));
    for (auto& b : buffers_) b.resize(problem.num_states());
  }

  // best(s) = max_a sum_{s'} P(s'|s,a) h(s'); optionally records the
  // lexicographically first maximiser (within a relative tie slack).
  void run(const double* h, double* best, std::uint16_t* argmax) {
    best_ = best;
    argmax_ = argmax;
    arg_value_.clear();
    if (argmax_) arg_value_.assign(problem_.num_states(), -std::numeric_limits<double>::infinity());
    leaf_ = 0;
    descend(0, 0, h);
  }

 private:
  void descend(int i, int ones, const double* in) {
    const int m = problem_.num_systems();
    const int n = problem_.budget();
    for (int attack : {1, 0}) {
      const int o = ones + attack;
      if (o > n || o + (m - i - 1) < n) continue;
      const ChannelOp op{problem_.stride(i), problem_.base(),
                         attack ? problem_.eps_attacked(i) : problem_.eps(i)};
      const std::size_t rows = problem_.num_states() / op.stride;
      if (i == m - 1) {
        const bool first = leaf_ == 0;
        const auto id = static_cast<std::uint16_t>(leaf_++);
        parallel_for(rows, threads_, [&](std::size_t b, std::size_t e) {
          op.run_rows(in, b, e, [&](std::size_t s, double v) {
            best_[s] = first ? v : std::max(best_[s], v);
            if (argmax_) {
              const double ref = arg_value_[s];
              if (first || v > ref + 1e-12 * (std::abs(ref) + 1.0)) {
                arg_value_[s] = v;
                argmax_[s] = id;
              }
            }
          });
        });
      } else {
        double* out = buffers_[static_cast<std::size_t>(i)].data();
        parallel_for(rows, threads_, [&](std::size_t b, std::size_t e) {
          op.run_rows(in, b, e, [&](std::size_t s, double v) { out[s] = v; });
        });
        descend(i + 1, o, out);
      }
    }
  }

  const MdpProblem& problem_;
  int threads_;
  std::vector<std::vector<double>> buffers_;
  std::vector<double> arg_value_;
  double* best_ = nullptr;
  std::uint16_t* argmax_ = nullptr;
  int leaf_ = 0;
};

}  // namespace

SolveResult relative_value_iteration(const MdpProblem& problem, const RviOptions& opts) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("relative_value_iteration: tol must be > 0");
  if (opts.reference_state >= problem.num_states())
    throw std::invalid_argument("relative_value_iteration: bad reference state");
  if (problem.actions().size() > std::numeric_limits<std::uint16_t>::max())
    throw DomainError("too many actions for the policy table");

  const auto n = static_cast<Eigen::Index>(problem.num_states());
  const auto ref = static_cast<Eigen::Index>(opts.reference_state);
  const Eigen::VectorXd& r = problem.rewards();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);
  BellmanSweep sweep(problem, opts.threads);

  SolveResult out;
  out.trunc = problem.trunc();
  double span = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opts.max_iter) {
    sweep.run(h.data(), next.data(), nullptr);
    next += r;
    ++it;
    span = detail::resolved_span(next, h);
    out.gain = next[ref] - h[ref];
    h = next.array() - next[ref];
    if (span < opts.tol) break;
  }
  if (!(span < opts.tol))
    throw ConvergenceError("relative value iteration did not converge", span, it);

  std::vector<std::uint16_t> arg(problem.num_states());
  sweep.run(h.data(), next.data(), arg.data());

  out.q = h.array() - h[0];
  out.iterations = it;
  out.span_at_exit = span;
  out.policy.num_systems = problem.num_systems();
  out.policy.trunc = problem.trunc();
  out.policy.actions.resize(problem.num_states());
  for (std::size_t s = 0; s < problem.num_states(); ++s)
    out.policy.actions[s] = problem.actions()[arg[s]];
  return out;
}

double bellman_residual(const MdpProblem& problem, const SolveResult& result, int threads) {
  const auto n = static_cast<Eigen::Index>(problem.num_states());
  if (result.q.size() != n) throw std::invalid_argument("bellman_residual: size mismatch");
  Eigen::VectorXd best(n);
  BellmanSweep sweep(problem, threads);
  sweep.run(result.q.data(), best.data(), nullptr);
  const Eigen::VectorXd rhs = problem.rewards().array() - result.gain + best.array();
  return (result.q - rhs).cwiseAbs().maxCoeff();
}

double evaluate_policy_gain(const MdpProblem& problem, const PolicyTable& policy, double tol,
                            int max_iter) {
  if (policy.actions.size() != problem.num_states() ||
      policy.num_systems != problem.num_systems() || policy.trunc != problem.trunc())
    throw std::invalid_argument("evaluate_policy_gain: policy does not match problem");

  // Successor lists are cached once; the grid is small by contract.
  std::vector<std::vector<Transition>> kernel(problem.num_states());
  for (std::size_t s = 0; s < problem.num_states(); ++s)
    kernel[s] = transition_distribution(problem, s, policy.actions[s]);

  const auto n = static_cast<Eigen::Index>(problem.num_states());
  const Eigen::VectorXd& r = problem.rewards();
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);
  double span = std::numeric_limits<double>::infinity();
  double gain = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    for (Eigen::Index s = 0; s < n; ++s) {
      double acc = 0.0;
      for (const auto& t : kernel[static_cast<std::size_t>(s)])
        acc += t.probability * h[static_cast<Eigen::Index>(t.state)];
      next[s] = r[s] + acc;
    }
    span = detail::resolved_span(next, h);
    gain = next[0] - h[0];
    h = next.array() - next[0];
    if (span < tol) return gain;
  }
  throw ConvergenceError("policy evaluation did not converge", span, max_iter);
}

}  // namespace attack_alloc
