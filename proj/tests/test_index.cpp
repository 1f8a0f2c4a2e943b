#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "attack_alloc/errors.hpp"
#include "attack_alloc/index.hpp"
#include "fixtures.hpp"

using namespace attack_alloc;

namespace {

// Untruncated single-arm chain under "attack iff holding time >= t":
// reward mass R_t = sum_j pi_t(j) Tr_j and refrain mass F_t = sum_{j<t} pi_t(j).
struct ThresholdMoments {
  long double R, F;
};

ThresholdMoments moments(const std::vector<double>& tr, double eps, double eps_att, int t) {
  std::vector<long double> w(tr.size());
  long double mass = 0, R = 0, F = 0;
  for (std::size_t j = 0; j < tr.size(); ++j) {
    const int jj = static_cast<int>(j);
    w[j] = jj <= t ? std::pow(1.0L - eps, jj)
                   : std::pow(1.0L - eps, t) * std::pow(1.0L - eps_att, jj - t);
    mass += w[j];
  }
  for (std::size_t j = 0; j < tr.size(); ++j) {
    R += w[j] / mass * tr[j];
    if (static_cast<int>(j) < t) F += w[j] / mass;
  }
  return {R, F};
}

// Subsidy making thresholds j and j+1 equally good on the untruncated chain.
double oracle_index(const SystemModeld& m, const std::vector<double>& tr, int j) {
  const auto a = moments(tr, m.eps, m.eps_attacked, j);
  const auto b = moments(tr, m.eps, m.eps_attacked, j + 1);
  return static_cast<double>((b.R - a.R) / (a.F - b.F));
}

// Average reward of a threshold rule on the chain clamped at trunc, by power iteration.
double clamped_gain(const SubsidyArm& arm, int t) {
  const int n = arm.trunc + 1;
  std::vector<double> pi(static_cast<std::size_t>(n), 0.0), next(pi.size());
  pi[0] = 1.0;
  for (int it = 0; it < 200000; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int j = 0; j < n; ++j) {
      const double p = j >= t ? arm.eps_attacked : arm.eps;
      next[0] += pi[static_cast<std::size_t>(j)] * p;
      next[static_cast<std::size_t>(std::min(j + 1, arm.trunc))] += pi[static_cast<std::size_t>(j)] * (1 - p);
    }
    double d = 0;
    for (int j = 0; j < n; ++j) d = std::max(d, std::abs(next[static_cast<std::size_t>(j)] - pi[static_cast<std::size_t>(j)]));
    pi.swap(next);
    if (d < 1e-15) break;
  }
  double g = 0;
  for (int j = 0; j < n; ++j)
    g += pi[static_cast<std::size_t>(j)] * (arm.traces[static_cast<std::size_t>(j)] + (j < t ? arm.subsidy : 0.0));
  return g;
}

}  // namespace

TEST_CASE("stationary mass at holding time zero") {
  CHECK(v_stationary(0.9, 0.4, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(v_stationary(0.9, 0.4, 1) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(std::abs(v_stationary(0.95, 0.5, 200) - 0.95) < 1e-12);
  CHECK(std::abs(v_stationary(0.9, 0.4, 200) - 0.9) < 1e-12);
  for (const auto& m : {fixtures::system1(), fixtures::system2()})
    for (int j = 0; j <= 200; ++j) {
      const double v = v_stationary(m, j);
      CHECK(v >= std::min(m.eps, m.eps_attacked) - 1e-15);
      CHECK(v <= std::max(m.eps, m.eps_attacked) + 1e-15);
    }
}

TEST_CASE("closed-form index matches the untruncated indifference subsidy") {
  for (const auto& m : {fixtures::system1(), fixtures::system2()}) {
    const auto s = steady_state_covariance(m);
    const auto tr = fixtures::traces(m, 900);
    const auto table = build_index_table(m, s, 40);
    REQUIRE(table.j_max >= 10);
    for (int j = 0; j <= table.j_max; ++j) {
      const double o = oracle_index(m, tr, j);
      const double got = table.values[static_cast<std::size_t>(j)];
      CHECK(std::abs(got - o) / std::max(1.0, std::abs(o)) <= 1e-3);
      if (j <= 8) CHECK(got == doctest::Approx(o).epsilon(1e-8));
    }
  }
}

TEST_CASE("closed-form index matches the subsidy search") {
  for (const auto& m : {fixtures::system1(), fixtures::system2()}) {
    const auto s = steady_state_covariance(m);
    const auto table = build_index_table(m, s, 40);
    for (int j = 0; j <= table.j_max; ++j) {
      const double o = index_oracle(m, s, j, default_oracle_trunc(m, j));
      CHECK(std::abs(table.values[static_cast<std::size_t>(j)] - o) / std::max(1.0, std::abs(o)) <=
            1e-3);
    }
  }
}

TEST_CASE("reliability cutoffs of the example systems") {
  const auto m1 = fixtures::system1();
  const auto m2 = fixtures::system2();
  const auto s1 = steady_state_covariance(m1);
  const auto s2 = steady_state_covariance(m2);
  const auto t1 = build_index_table(m1, s1, 40);
  const auto t2 = build_index_table(m2, s2, 40);
  CHECK(std::abs(t1.j_max + 1 - 13) <= 1);
  CHECK(std::abs(t2.j_max + 1 - 17) <= 1);
  CHECK_THROWS_AS(whittle_index(m1, s1, t1.j_max + 1), NumericallyUnreliable);
  try {
    whittle_index(m2, s2, t2.j_max + 1);
  } catch (const NumericallyUnreliable& e) {
    CHECK(e.j() == t2.j_max + 1);
  }
  CHECK(std::isinf(index_conditioning(m1, 0)));
}

TEST_CASE("index tables are monotone and model-determined") {
  const auto m = fixtures::system2();
  const auto s = steady_state_covariance(m);
  const auto a = build_index_table(m, s, 40);
  const auto b = build_index_table(m, s, 40);
  CHECK(a.monotone);
  CHECK(a.values == b.values);
  for (std::size_t j = 1; j < a.values.size(); ++j) CHECK(a.values[j] >= a.values[j - 1]);
  CHECK(whittle_index(m, s, 4, 1e-12) == doctest::Approx(whittle_index(m, s, 4, 1e-15)).epsilon(1e-10));
}

TEST_CASE("index keys beyond the reliable range") {
  IndexTable t;
  t.values = {1.0, 2.0, 3.0};
  t.j_max = 2;
  CHECK(index_key(t, 1).value == 2.0);
  CHECK(index_key(t, 9).value == 3.0);
  CHECK(index_key(t, 9) > index_key(t, 5));
  CHECK(index_key(t, 5) > index_key(t, 2));
}

TEST_CASE("single-arm problem at the subsidy extremes") {
  const auto m = fixtures::system2();
  const auto s = steady_state_covariance(m);
  const int L = 19;
  const auto free = single_arm_solve(SubsidyArm::from_model(m, s, 0.0, L));
  CHECK(free.threshold == 0);
  const auto tr = fixtures::traces(m, L + 1);
  const auto costly = single_arm_solve(SubsidyArm::from_model(m, s, 10.0 * tr[L], L));
  CHECK(costly.threshold == L + 1);
}

TEST_CASE("indifference at the index") {
  const auto m = fixtures::system2();
  const auto s = steady_state_covariance(m);
  const double z = whittle_index(m, s, 3);
  const auto arm = SubsidyArm::from_model(m, s, z, default_oracle_trunc(m, 3));
  const double g3 = threshold_policy_gain(arm, 3);
  const double g4 = threshold_policy_gain(arm, 4);
  CHECK(std::abs(g3 - g4) <= 1e-6 * std::abs(g3));
  const auto sol = single_arm_solve(arm);
  CHECK((sol.threshold == 3 || sol.threshold == 4));
  CHECK(sol.gain == doctest::Approx(std::max(g3, g4)).epsilon(1e-7));
}

TEST_CASE("threshold gains on the clamped chain") {
  const auto m = fixtures::system1();
  const auto s = steady_state_covariance(m);
  const auto arm = SubsidyArm::from_model(m, s, 7.5, 15);
  for (int t : {0, 1, 4, 9, 15, 16})
    CHECK(threshold_policy_gain(arm, t) == doctest::Approx(clamped_gain(arm, t)).epsilon(1e-9));
}

TEST_CASE("indexability over a subsidy grid") {
  for (const auto& m : {fixtures::system1(), fixtures::system2()}) {
    const auto s = steady_state_covariance(m);
    const auto table = build_index_table(m, s, 40);
    std::vector<double> grid;
    for (int k = 0; k < 50; ++k) grid.push_back(2.0 * table.values.back() * k / 49.0);
    const auto rep = indexability_check(m, s, grid, default_oracle_trunc(m, table.j_max));
    CHECK(rep.pass);
    CHECK(rep.witnesses.empty());
    for (std::size_t k = 1; k < rep.thresholds.size(); ++k) CHECK(rep.thresholds[k] >= rep.thresholds[k - 1]);
  }

  const std::vector<double> z{0.0, 1.0, 2.0};
  const std::vector<std::vector<bool>> tables{
      {true, true, true}, {false, true, true}, {true, true, true}};
  const auto bad = check_indexability(z, tables);
  CHECK_FALSE(bad.pass);
  REQUIRE_FALSE(bad.witnesses.empty());
  CHECK(bad.witnesses[0].j == 0);
  CHECK(bad.witnesses[0].z_low == 1.0);
  CHECK(bad.witnesses[0].z_high == 2.0);
}
