#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <random>

#include "attack_alloc/model.hpp"
#include "fixtures.hpp"

using namespace attack_alloc;

namespace {

using Mat2 = std::array<std::array<double, 2>, 2>;

Mat2 mul(const Mat2& a, const Mat2& b) {
  Mat2 c{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return c;
}

Mat2 transpose(const Mat2& a) { return {{{a[0][0], a[1][0]}, {a[0][1], a[1][1]}}}; }

// Posterior Riccati fixed point for a 2-state, 1-output model, written out by hand.
Mat2 riccati_2x1(const Mat2& A, std::array<double, 2> c, const Mat2& Q, double r) {
  Mat2 P = Q;
  for (int it = 0; it < 20000; ++it) {
    Mat2 Pm = mul(mul(A, P), transpose(A));
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) Pm[i][j] += Q[i][j];
    const double pc0 = Pm[0][0] * c[0] + Pm[0][1] * c[1];
    const double pc1 = Pm[1][0] * c[0] + Pm[1][1] * c[1];
    const double s = c[0] * pc0 + c[1] * pc1 + r;
    const double off = 0.5 * (Pm[0][1] + Pm[1][0]) - pc0 * pc1 / s;
    Mat2 Pn{{{Pm[0][0] - pc0 * pc0 / s, off}, {off, Pm[1][1] - pc1 * pc1 / s}}};
    double d = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) d = std::max(d, std::abs(Pn[i][j] - P[i][j]));
    P = Pn;
    if (d < 1e-14) break;
  }
  return P;
}

Eigen::MatrixXd random_psd(std::mt19937_64& g, int n) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd Z(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Z(i, j) = nd(g);
  return Z * Z.transpose();
}

double min_eig(const Eigen::MatrixXd& X) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(X).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("steady-state covariances of the example systems") {
  const auto s1 = steady_state_covariance(fixtures::system1());
  const auto s2 = steady_state_covariance(fixtures::system2());
  CHECK(std::abs(s1.P_hat(0, 0) - 0.79) < 0.01);
  CHECK(std::abs(s1.P_hat(0, 1) - 0.54) < 0.01);
  CHECK(std::abs(s2.P_hat(0, 0) - 1.54) < 0.01);
  CHECK(std::abs(s2.P_hat(0, 1) + 0.49) < 0.01);
  CHECK(std::abs(s2.P_hat(1, 1) - 11.87) < 0.01);
  CHECK(std::abs(s1.trace_seq[0] - 8.79) < 0.02);
  CHECK(std::abs(s2.trace_seq[0] - 13.41) < 0.02);
}

TEST_CASE("steady state matches a hand-written 2x2 Riccati iteration") {
  const Mat2 P1 = riccati_2x1({{{1.2, 0.2}, {0.3, 1.0}}}, {1.0, 0.0}, {{{2, 0}, {0, 1}}}, 1.0);
  const Mat2 P2 =
      riccati_2x1({{{1.2, 0.15}, {0.0, 1.1}}}, {1.0, 0.2}, {{{1, 0.5}, {0.5, 0.5}}}, 3.0);
  const auto s1 = steady_state_covariance(fixtures::system1());
  const auto s2 = steady_state_covariance(fixtures::system2());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(s1.P_hat(i, j) == doctest::Approx(P1[i][j]).epsilon(1e-8));
      CHECK(s2.P_hat(i, j) == doctest::Approx(P2[i][j]).epsilon(1e-8));
    }
}

TEST_CASE("scalar steady state equals the root of the scalar fixed-point quadratic") {
  const double a = 1.2, q = 1.0, r = 1.0;
  // P = (a^2 P + q) r / (a^2 P + q + r)  <=>  a^2 P^2 + (q + r - r a^2) P - r q = 0
  const double b = q + r - r * a * a;
  const double root = (-b + std::sqrt(b * b + 4 * a * a * r * q)) / (2 * a * a);
  const auto s = steady_state_covariance(fixtures::scalar(a, 0.9, 0.5));
  CHECK(s.P_hat(0, 0) == doctest::Approx(root).epsilon(1e-9));
  CHECK(s.residual < 1e-10);
}

TEST_CASE("Riccati residual and symmetry at convergence") {
  for (const auto& m : {fixtures::system1(), fixtures::system2()}) {
    const auto s = steady_state_covariance(m);
    const auto next = riccati_posterior(m, s.P_hat);
    CHECK((next - s.P_hat).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((s.P_hat - s.P_hat.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(min_eig(s.P_hat) >= 0.0);
  }
}

TEST_CASE("apply_h trivial cases") {
  auto m = fixtures::system1();
  const Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 2);
  CHECK((apply_h(m, X) - m.Q).cwiseAbs().maxCoeff() == 0.0);

  m.A = Eigen::MatrixXd::Identity(2, 2);
  m.Q = Eigen::MatrixXd::Zero(2, 2);
  std::mt19937_64 g(3);
  const Eigen::MatrixXd Y = random_psd(g, 2);
  CHECK((apply_h(m, Y) - Y).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::MatrixXd big = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(apply_h(m, big), std::invalid_argument);
}

TEST_CASE("trace sequence agrees with direct matrix arithmetic") {
  const auto m = fixtures::system1();
  const auto s = steady_state_covariance(m);
  Eigen::MatrixXd X = s.P_hat;
  for (int j = 0; j <= 100; ++j) {
    CHECK(trace_at(s, m, j) == doctest::Approx(X.trace()).epsilon(1e-12));
    X = m.A * X * m.A.transpose() + m.Q;
  }
  CHECK(s.trace_seq.size() == static_cast<std::size_t>(kDefaultTraceCap));
}

TEST_CASE("trace sequence is nondecreasing and bounded by c |A|^(2j)") {
  for (const auto& m : {fixtures::system1(), fixtures::system2()}) {
    const auto s = steady_state_covariance(m);
    const double rho = spectral_radius(m.A);
    double prev = -1.0, ratio_max = 0.0, ratio_late = 0.0;
    for (int j = 0; j <= 60; ++j) {
      const double t = trace_at(s, m, j);
      CHECK(t >= prev);
      prev = t;
      const double ratio = t / std::pow(rho, 2 * j);
      ratio_max = std::max(ratio_max, ratio);
      if (j == 60) ratio_late = ratio;
    }
    CHECK(std::isfinite(ratio_max));
    CHECK(ratio_late <= ratio_max);
  }
}

TEST_CASE("h preserves the Loewner order") {
  std::mt19937_64 g(11);
  for (const auto& m : {fixtures::system1(), fixtures::system2()}) {
    for (int k = 0; k < 50; ++k) {
      const Eigen::MatrixXd X = random_psd(g, 2);
      const Eigen::MatrixXd Y = X + random_psd(g, 2);
      CHECK(min_eig(apply_h(m, Y) - apply_h(m, X)) >= -1e-10);
    }
  }
}

TEST_CASE("validation reports") {
  CHECK(validate_model(fixtures::system1()).ok());
  CHECK(validate_model(fixtures::system2()).ok());

  const auto trivial = validate_model(fixtures::scalar(1.2, 0.9, 0.2));
  REQUIRE_FALSE(trivial.ok());
  CHECK(trivial.violations[0].check == "anti_triviality");

  auto same = fixtures::system2();
  same.eps_attacked = same.eps;
  const auto rep = validate_model(same);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations[0].check == "rate_ordering");

  const auto stable = validate_model(fixtures::scalar(0.9, 0.9, 0.5));
  CHECK_FALSE(stable.ok());
  CHECK(stable.violations[0].check == "instability");

  auto bad_dims = fixtures::system1();
  bad_dims.C = Eigen::MatrixXd::Ones(1, 3);
  CHECK_THROWS_AS(validate_model(bad_dims), std::invalid_argument);
}

TEST_CASE("undetectable system fails to converge") {
  auto m = fixtures::system1();
  m.C = Eigen::MatrixXd::Zero(1, 2);
  CHECK_THROWS_AS(steady_state_covariance(m, 1e-10, 500), ConvergenceError);
  const auto rep = validate_model(m);
  REQUIRE_FALSE(rep.ok());
  CHECK(rep.violations.back().check == "riccati_convergence");
}
