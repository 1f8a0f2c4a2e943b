#pragma once

// Subsystem models for remote estimation over lossy channels: steady-state
// Kalman covariance via Riccati iteration and the open-loop propagation
// operator h(X) = A X A^T + Q applied once per dropped packet.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "attack_alloc/errors.hpp"

namespace attack_alloc {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct SystemModel {
  MatrixX<Scalar> A;  // n x n
  MatrixX<Scalar> C;  // m x n
  MatrixX<Scalar> Q;  // n x n, PSD
  MatrixX<Scalar> R;  // m x m, PD
  Scalar eps = Scalar(1);           // arrival rate without attack
  Scalar eps_attacked = Scalar(0);  // arrival rate under attack
  Scalar weight = Scalar(1);
  std::string name;

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index output_dim() const { return C.rows(); }
};

template <typename Scalar>
struct SteadyState {
  MatrixX<Scalar> P_hat;
  std::vector<Scalar> trace_seq;  // Tr(h^j(P_hat)), j = 0..size()-1
  MatrixX<Scalar> last;           // h^{size()-1}(P_hat), seed for lazy extension
  int iterations = 0;
  Scalar residual = Scalar(0);
};

struct Violation {
  std::string check;
  std::string message;
};

struct ValidationReport {
  std::string model_name;
  std::vector<Violation> violations;
  double spectral_radius = 0.0;

  bool ok() const { return violations.empty(); }
};

namespace detail {

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& X) {
  return (X + X.transpose()) / typename Derived::Scalar(2);
}

template <typename Scalar>
Scalar min_eigenvalue(const MatrixX<Scalar>& X) {
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(symmetrized(X),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace detail

template <typename Scalar>
void check_dimensions(const SystemModel<Scalar>& m) {
  const auto n = m.A.rows();
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("model '" + m.name + "': " + what);
  };
  if (n == 0 || m.A.cols() != n) fail("A must be square and non-empty");
  if (m.C.cols() != n || m.C.rows() == 0) fail("C must have as many columns as A");
  if (m.Q.rows() != n || m.Q.cols() != n) fail("Q must match A");
  if (m.R.rows() != m.C.rows() || m.R.cols() != m.C.rows())
    fail("R must be square with as many rows as C");
}

/// Largest eigenvalue magnitude of A.
template <typename Scalar>
Scalar spectral_radius(const MatrixX<Scalar>& A) {
  Eigen::EigenSolver<MatrixX<Scalar>> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// h(X) = A X A^T + Q, symmetrized.
template <typename Scalar>
MatrixX<Scalar> apply_h(const SystemModel<Scalar>& m, const MatrixX<Scalar>& X) {
  if (X.rows() != m.A.rows() || X.cols() != m.A.rows())
    throw std::invalid_argument("apply_h: X has wrong dimensions");
  MatrixX<Scalar> Y = m.A * X * m.A.transpose() + m.Q;
  return detail::symmetrized(Y);
}

/// One Kalman step: prior h(X), then the measurement update.
template <typename Scalar>
MatrixX<Scalar> riccati_posterior(const SystemModel<Scalar>& m,
                                  const MatrixX<Scalar>& X) {
  const MatrixX<Scalar> prior = apply_h(m, X);
  const MatrixX<Scalar> innovation = m.C * prior * m.C.transpose() + m.R;
  // K^T = S^{-1} C P  (S symmetric PD)
  const MatrixX<Scalar> gain_t = innovation.ldlt().solve(m.C * prior);
  MatrixX<Scalar> post = prior - prior * m.C.transpose() * gain_t;
  return detail::symmetrized(post);
}

inline constexpr int kDefaultTraceCap = 64;

/// Posterior Riccati iteration started from Q. Throws ConvergenceError when
/// successive iterates still differ by tol (max-abs) after max_iter steps.
template <typename Scalar>
SteadyState<Scalar> steady_state_covariance(const SystemModel<Scalar>& m,
                                            Scalar tol = Scalar(1e-10),
                                            int max_iter = 10000,
                                            int trace_cap = kDefaultTraceCap) {
  check_dimensions(m);
  SteadyState<Scalar> out;
  MatrixX<Scalar> P = detail::symmetrized(m.Q);
  Scalar diff = std::numeric_limits<Scalar>::infinity();
  int it = 0;
  while (it < max_iter) {
    MatrixX<Scalar> next = riccati_posterior(m, P);
    diff = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    ++it;
    if (!std::isfinite(static_cast<double>(diff))) break;
    if (diff < tol) break;
  }
  if (!(diff < tol)) {
    throw ConvergenceError("Riccati iteration for model '" + m.name +
                               "' did not converge (detectability/stabilizability?)",
                           static_cast<double>(diff), it);
  }
  out.P_hat = P;
  out.iterations = it;
  out.residual = (riccati_posterior(m, P) - P).cwiseAbs().maxCoeff();

  const int cap = std::max(trace_cap, 1);
  out.trace_seq.reserve(cap);
  MatrixX<Scalar> X = P;
  out.trace_seq.push_back(X.trace());
  for (int j = 1; j < cap; ++j) {
    X = apply_h(m, X);
    out.trace_seq.push_back(X.trace());
  }
  out.last = X;
  return out;
}

/// Tr(h^j(P_hat)); beyond the cached range the sequence is extended from the
/// last cached iterate without touching the cache.
template <typename Scalar>
Scalar trace_at(const SteadyState<Scalar>& steady, const SystemModel<Scalar>& m,
                int j) {
  if (j < 0) throw std::invalid_argument("trace_at: negative holding time");
  const auto cached = static_cast<int>(steady.trace_seq.size());
  if (j < cached) return steady.trace_seq[static_cast<std::size_t>(j)];
  MatrixX<Scalar> X = steady.last;
  for (int k = cached - 1; k < j; ++k) X = apply_h(m, X);
  return X.trace();
}

/// Traces Tr(h^j(P_hat)) for j = 0..count-1.
template <typename Scalar>
std::vector<Scalar> trace_sequence(const SteadyState<Scalar>& steady,
                                   const SystemModel<Scalar>& m, int count) {
  std::vector<Scalar> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  const auto cached = static_cast<int>(steady.trace_seq.size());
  for (int j = 0; j < std::min(count, cached); ++j)
    out.push_back(steady.trace_seq[static_cast<std::size_t>(j)]);
  if (count > cached) {
    MatrixX<Scalar> X = steady.last;
    for (int j = cached; j < count; ++j) {
      X = apply_h(m, X);
      out.push_back(X.trace());
    }
  }
  return out;
}

/// Checks the modelling assumptions. Dimension errors throw; every violated
/// assumption becomes an entry in the report.
template <typename Scalar>
ValidationReport validate_model(const SystemModel<Scalar>& m) {
  check_dimensions(m);
  ValidationReport rep;
  rep.model_name = m.name;
  auto add = [&](std::string check, std::string msg) {
    rep.violations.push_back({std::move(check), std::move(msg)});
  };

  const Scalar rho = spectral_radius(m.A);
  rep.spectral_radius = static_cast<double>(rho);
  if (!(rho > Scalar(1)))
    add("instability", "spectral radius |A| = " + std::to_string(rho) + " must exceed 1");

  if (!(m.eps_attacked > Scalar(0) && m.eps_attacked < m.eps && m.eps <= Scalar(1)))
    add("rate_ordering",
        "channel rates require 0 < eps_attacked < eps <= 1 (got eps=" +
            std::to_string(m.eps) + ", eps_attacked=" + std::to_string(m.eps_attacked) +
            ")");

  if (rho > Scalar(1)) {
    const Scalar bound = Scalar(1) - Scalar(1) / (rho * rho);
    if (!(m.eps_attacked > bound))
      add("anti_triviality", "eps_attacked = " + std::to_string(m.eps_attacked) +
                                 " must exceed 1 - 1/|A|^2 = " + std::to_string(bound));
  }

  if (!(m.weight >= Scalar(0))) add("weight", "weight must be nonnegative");

  const Scalar sym_tol = Scalar(1e-12);
  if ((m.Q - m.Q.transpose()).cwiseAbs().maxCoeff() > sym_tol)
    add("Q_symmetric", "Q is not symmetric");
  else if (detail::min_eigenvalue<Scalar>(m.Q) < -Scalar(1e-12))
    add("Q_psd", "Q is not positive semi-definite");
  if ((m.R - m.R.transpose()).cwiseAbs().maxCoeff() > sym_tol)
    add("R_symmetric", "R is not symmetric");
  else if (!(detail::min_eigenvalue<Scalar>(m.R) > Scalar(0)))
    add("R_pd", "R is not positive definite");

  if (rep.ok()) {
    try {
      (void)steady_state_covariance(m);
    } catch (const ConvergenceError& e) {
      add("riccati_convergence", e.what());
    }
  }
  return rep;
}

using SystemModeld = SystemModel<double>;
using SteadyStated = SteadyState<double>;

}  // namespace attack_alloc
