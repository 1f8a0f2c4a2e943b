#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "attack_alloc/model.hpp"

namespace fixtures {

inline attack_alloc::SystemModeld system1() {
  attack_alloc::SystemModeld m;
  m.A.resize(2, 2);
  m.A << 1.2, 0.2, 0.3, 1.0;
  m.C.resize(1, 2);
  m.C << 1.0, 0.0;
  m.Q.resize(2, 2);
  m.Q << 2.0, 0.0, 0.0, 1.0;
  m.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.eps = 0.95;
  m.eps_attacked = 0.5;
  m.name = "system1";
  return m;
}

inline attack_alloc::SystemModeld system2() {
  attack_alloc::SystemModeld m;
  m.A.resize(2, 2);
  m.A << 1.2, 0.15, 0.0, 1.1;
  m.C.resize(1, 2);
  m.C << 1.0, 0.2;
  m.Q.resize(2, 2);
  m.Q << 1.0, 0.5, 0.5, 0.5;
  m.R = Eigen::MatrixXd::Constant(1, 1, 3.0);
  m.eps = 0.9;
  m.eps_attacked = 0.4;
  m.name = "system2";
  return m;
}

// x' = a x + w, y = x + v with unit noise variances.
inline attack_alloc::SystemModeld scalar(double a, double eps, double eps_attacked) {
  attack_alloc::SystemModeld m;
  m.A = Eigen::MatrixXd::Constant(1, 1, a);
  m.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.Q = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.R = Eigen::MatrixXd::Constant(1, 1, 1.0);
  m.eps = eps;
  m.eps_attacked = eps_attacked;
  m.name = "scalar";
  return m;
}

inline std::vector<double> traces(const attack_alloc::SystemModeld& m, int count) {
  const auto s = attack_alloc::steady_state_covariance(m);
  return attack_alloc::trace_sequence(s, m, count);
}

}  // namespace fixtures
