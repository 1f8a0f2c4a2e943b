#include "attack_alloc/index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "attack_alloc/detail/span.hpp"
#include "attack_alloc/errors.hpp"

namespace attack_alloc {

namespace {

constexpr double kUnitRoundoff = std::numeric_limits<double>::epsilon() / 2.0;

// a(j) = sum_{n<j} (1-eps)^n
double unattacked_steps(double eps, int j) {
  return (1.0 - std::pow(1.0 - eps, j)) / eps;
}

void check_rates(double eps, double eps_attacked) {
  if (!(eps_attacked > 0.0 && eps_attacked < eps && eps <= 1.0))
    throw std::invalid_argument("index: need 0 < eps_attacked < eps <= 1");
}

// sum_{m>=0} (1-eps_attacked)^m Tr(h^{start+m}(P_hat)), truncated once a term
// falls below tail_tol of the running sum, plus the geometric remainder.
double attacked_tail(const SystemModeld& m, const SteadyStated& steady, int start,
                     double tail_tol) {
  const double decay = 1.0 - m.eps_attacked;
  const double rho = spectral_radius(m.A);
  if (!(decay * rho * rho < 1.0))
    throw std::invalid_argument("index: tail series diverges, (1-eps_attacked)|A|^2 >= 1");

  MatrixX<double> X = steady.P_hat;
  for (int k = 0; k < start; ++k) X = apply_h(m, X);
  double weight = 1.0;
  double sum = 0.0;
  double prev_term = 0.0;
  constexpr int kMaxTerms = 200000;
  for (int n = 0; n < kMaxTerms; ++n) {
    const double term = weight * X.trace();
    if (!std::isfinite(term)) throw std::overflow_error("index: tail sum overflowed");
    sum += term;
    if (n > 0 && term < tail_tol * sum) {
      const double r = std::max(term / prev_term, decay * rho * rho);
      if (r < 1.0) sum += term * r / (1.0 - r);
      return sum;
    }
    prev_term = term;
    weight *= decay;
    X = apply_h(m, X);
  }
  throw ConvergenceError("index: tail sum did not converge", prev_term / sum, kMaxTerms);
}

}  // namespace

double v_stationary(double eps, double eps_attacked, int j) {
  if (j < 0) throw std::invalid_argument("v_stationary: negative holding time");
  const double x = std::pow(1.0 - eps, j);
  return 1.0 / ((1.0 - x) / eps + x / eps_attacked);
}

double index_conditioning(const SystemModeld& m, int j) {
  if (j < 0) throw std::invalid_argument("index_conditioning: negative holding time");
  check_rates(m.eps, m.eps_attacked);
  if (j == 0) return std::numeric_limits<double>::infinity();
  // v(j)a(j) - v(j+1)a(j+1) = -x_j v(j) v(j+1) / eps_attacked with x_j = (1-eps)^j.
  const double x = std::pow(1.0 - m.eps, j);
  const double a = unattacked_steps(m.eps, j);
  return x * v_stationary(m, j + 1) / (m.eps_attacked * a);
}

double whittle_index(const SystemModeld& m, const SteadyStated& steady, int j,
                     double tail_tol) {
  const double cond = index_conditioning(m, j);
  if (cond < kUnitRoundoff) throw NumericallyUnreliable(j, cond);

  // Both sides of the balance are renewal-reward averages (a(t) z + S(t)) / T(t)
  // with cycle length T(t) = 1 / v(t). Taking the differences between
  // consecutive thresholds analytically removes the common factor
  // (1-eps)^j, leaving
  //   o(j) = (eps - eps_att) * (eps_att * a(j+1) * W(j+1) - F(j)),
  // with F(j) = sum_{n<=j} (1-eps)^n Tr_n and W(j+1) the attacked tail from j+1.
  double head = 0.0;
  double discount = 1.0;
  MatrixX<double> X = steady.P_hat;
  for (int n = 0; n <= j; ++n) {
    head += discount * X.trace();
    discount *= 1.0 - m.eps;
    if (n < j) X = apply_h(m, X);
  }
  const double tail = attacked_tail(m, steady, j + 1, tail_tol);
  const double a_next = unattacked_steps(m.eps, j + 1);
  return (m.eps - m.eps_attacked) * (m.eps_attacked * a_next * tail - head);
}

IndexTable build_index_table(const SystemModeld& m, const SteadyStated& steady, int j_cap,
                             double tail_tol) {
  IndexTable t;
  t.model_id = m.name;
  for (int j = 0; j <= j_cap; ++j) {
    try {
      t.values.push_back(whittle_index(m, steady, j, tail_tol));
    } catch (const NumericallyUnreliable&) {
      break;
    }
  }
  t.j_max = static_cast<int>(t.values.size()) - 1;
  for (std::size_t k = 1; k < t.values.size(); ++k)
    if (t.values[k] < t.values[k - 1]) t.monotone = false;
  return t;
}

IndexKey index_key(const IndexTable& table, int tau) {
  if (table.j_max < 0) throw std::invalid_argument("index_key: empty index table");
  const int j = std::min(tau, table.j_max);
  return {table.values[static_cast<std::size_t>(j)], tau};
}

SubsidyArm SubsidyArm::from_model(const SystemModeld& m, const SteadyStated& steady,
                                  double subsidy, int trunc) {
  if (trunc < 1) throw std::invalid_argument("SubsidyArm: trunc must be >= 1");
  SubsidyArm arm;
  arm.traces = trace_sequence(steady, m, trunc + 1);
  arm.eps = m.eps;
  arm.eps_attacked = m.eps_attacked;
  arm.subsidy = subsidy;
  arm.trunc = trunc;
  return arm;
}

namespace {

SingleArmResult solve_arm(const SubsidyArm& arm, double tol, int max_iter,
                          Eigen::VectorXd* warm) {
  if (arm.trunc < 1 || static_cast<int>(arm.traces.size()) != arm.trunc + 1)
    throw std::invalid_argument("single_arm_solve: malformed arm");
  const int L = arm.trunc;
  const auto n = static_cast<Eigen::Index>(L + 1);
  Eigen::VectorXd h = (warm && warm->size() == n) ? *warm : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);

  auto q_values = [&](const Eigen::VectorXd& v, Eigen::Index j) {
    const double up = v[std::min<Eigen::Index>(j + 1, L)];
    const double refrain = arm.subsidy + arm.eps * v[0] + (1.0 - arm.eps) * up;
    const double attack = arm.eps_attacked * v[0] + (1.0 - arm.eps_attacked) * up;
    return std::pair{refrain, attack};
  };

  SingleArmResult out;
  double span = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < max_iter) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto [refrain, attack] = q_values(h, j);
      next[j] = arm.traces[static_cast<std::size_t>(j)] + std::max(refrain, attack);
    }
    ++it;
    span = detail::resolved_span(next, h);
    out.gain = next[0] - h[0];
    h = next.array() - next[0];
    if (span < tol) break;
  }
  if (!(span < tol)) throw ConvergenceError("single-arm value iteration did not converge", span, it);
  if (warm) *warm = h;

  out.iterations = it;
  out.attack.resize(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto [refrain, attack] = q_values(h, j);
    const double slack = 1e-12 * (std::abs(refrain) + std::abs(attack) + 1.0);
    out.attack[static_cast<std::size_t>(j)] = attack > refrain + slack;
  }
  const auto first = std::find(out.attack.begin(), out.attack.end(), true);
  out.threshold = static_cast<int>(first - out.attack.begin());
  if (std::find(first, out.attack.end(), false) != out.attack.end())
    throw StructureError("single-arm optimal rule is not a threshold at subsidy " +
                         std::to_string(arm.subsidy));
  return out;
}

}  // namespace

SingleArmResult single_arm_solve(const SubsidyArm& arm, double tol, int max_iter) {
  return solve_arm(arm, tol, max_iter, nullptr);
}

double threshold_policy_gain(const SubsidyArm& arm, int threshold) {
  const int L = arm.trunc;
  if (threshold < 0 || threshold > L + 1)
    throw std::invalid_argument("threshold_policy_gain: threshold outside [0, trunc+1]");
  auto reset = [&](int j) { return j < threshold ? arm.eps : arm.eps_attacked; };
  // Unnormalised stationary weights of the clamped reset chain.
  std::vector<double> w(static_cast<std::size_t>(L + 1));
  w[0] = 1.0;
  for (int j = 1; j < L; ++j)
    w[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j - 1)] * (1.0 - reset(j - 1));
  w[static_cast<std::size_t>(L)] =
      w[static_cast<std::size_t>(L - 1)] * (1.0 - reset(L - 1)) / reset(L);
  double mass = 0.0;
  double reward = 0.0;
  for (int j = 0; j <= L; ++j) {
    const double p = w[static_cast<std::size_t>(j)];
    mass += p;
    reward += p * (arm.traces[static_cast<std::size_t>(j)] + (j < threshold ? arm.subsidy : 0.0));
  }
  return reward / mass;
}

int default_oracle_trunc(const SystemModeld& m, int j) {
  const double rho = spectral_radius(m.A);
  const double ratio = (1.0 - m.eps_attacked) * rho * rho;
  if (!(ratio < 1.0 && ratio > 0.0))
    throw std::invalid_argument("default_oracle_trunc: tail ratio outside (0, 1)");
  const int extra = static_cast<int>(std::ceil(std::log(1e-10) / std::log(ratio)));
  return j + std::max(extra, 20);
}

double index_oracle(const SystemModeld& m, const SteadyStated& steady, int j, int trunc,
                    double tol) {
  if (j < 0 || j >= trunc) throw std::invalid_argument("index_oracle: j must lie below trunc");
  SubsidyArm arm = SubsidyArm::from_model(m, steady, 0.0, trunc);
  Eigen::VectorXd warm;
  auto above = [&](double z) {
    arm.subsidy = z;
    return solve_arm(arm, 1e-9, 1000000, &warm).threshold > j;
  };

  double lo = 0.0;
  if (above(lo)) throw DomainError("index_oracle: threshold exceeds j at zero subsidy");
  double hi = 2.0 * arm.traces.back();
  int widen = 0;
  while (!above(hi)) {
    if (++widen > 60) throw DomainError("index_oracle: no subsidy bracket found");
    lo = hi;
    hi *= 2.0;
  }
  // Geometric bisection while the bracket spans orders of magnitude.
  double floor_z = std::max(tol, 1e-12);
  while (hi - lo > tol * std::max(1.0, hi)) {
    const double mid = (hi > 4.0 * std::max(lo, floor_z)) ? std::sqrt(std::max(lo, floor_z) * hi)
                                                          : 0.5 * (lo + hi);
    if (above(mid))
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

IndexabilityReport check_indexability(const std::vector<double>& z_grid,
                                      const std::vector<std::vector<bool>>& attack_tables) {
  if (z_grid.size() != attack_tables.size())
    throw std::invalid_argument("check_indexability: one rule per grid point required");
  if (!std::is_sorted(z_grid.begin(), z_grid.end()))
    throw std::invalid_argument("check_indexability: subsidy grid must be ascending");
  IndexabilityReport rep;
  rep.z_grid = z_grid;
  for (const auto& rule : attack_tables) {
    const auto first = std::find(rule.begin(), rule.end(), true);
    rep.thresholds.push_back(static_cast<int>(first - rule.begin()));
  }
  for (std::size_t k = 1; k < attack_tables.size(); ++k) {
    const auto& before = attack_tables[k - 1];
    const auto& after = attack_tables[k];
    const std::size_t n = std::min(before.size(), after.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (!before[j] && after[j]) {
        rep.pass = false;
        rep.witnesses.push_back({z_grid[k - 1], z_grid[k], static_cast<int>(j)});
      }
    }
  }
  return rep;
}

IndexabilityReport indexability_check(const SystemModeld& m, const SteadyStated& steady,
                                      const std::vector<double>& z_grid, int trunc,
                                      double tol) {
  SubsidyArm arm = SubsidyArm::from_model(m, steady, 0.0, trunc);
  std::vector<std::vector<bool>> rules;
  rules.reserve(z_grid.size());
  Eigen::VectorXd warm;
  for (double z : z_grid) {
    arm.subsidy = z;
    rules.push_back(solve_arm(arm, tol, 1000000, &warm).attack);
  }
  return check_indexability(z_grid, rules);
}

}  // namespace attack_alloc
