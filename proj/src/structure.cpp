#include "attack_alloc/structure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace attack_alloc {

namespace {

constexpr std::size_t kMaxReported = 64;

void record(StructureReport& rep, std::vector<int> coords, std::string msg, double mag) {
  rep.pass = false;
  rep.worst_violation = std::max(rep.worst_violation, mag);
  if (rep.violations.size() < kMaxReported)
    rep.violations.push_back({std::move(coords), std::move(msg), mag});
}

std::size_t checked_states(const PolicyTable& p) {
  std::size_t n = 1;
  for (int i = 0; i < p.num_systems; ++i) n *= static_cast<std::size_t>(p.base());
  if (n != p.actions.size())
    throw std::invalid_argument("policy table size does not match its grid");
  return n;
}

}  // namespace

bool verify_exactly_n(const PolicyTable& policy, int budget) {
  return std::all_of(policy.actions.begin(), policy.actions.end(),
                     [&](AttackSet a) { return attack_size(a) == budget; });
}

StructureReport verify_threshold_structure(const PolicyTable& policy) {
  if (policy.num_systems != 2)
    throw std::invalid_argument("verify_threshold_structure requires two channels");
  checked_states(policy);
  const int L = policy.trunc;
  for (AttackSet a : policy.actions)
    if (a != 1u && a != 2u)
      throw std::invalid_argument("verify_threshold_structure requires budget one");

  StructureReport rep;
  auto act = [&](int j1, int j2) {
    const int c[2] = {j1, j2};
    return policy.at(c);
  };

  rep.critical_curve.assign(static_cast<std::size_t>(L + 1), L + 1);
  for (int j2 = 0; j2 <= L; ++j2) {
    bool inside = false;
    for (int j1 = 0; j1 <= L; ++j1) {
      const bool attack1 = act(j1, j2) == 1u;
      if (attack1 && !inside) {
        inside = true;
        rep.critical_curve[static_cast<std::size_t>(j2)] = j1;
      } else if (!attack1 && inside) {
        record(rep, {j1, j2}, "attack-1 region not upward closed in j1", 1.0);
      }
    }
  }
  for (int j1 = 0; j1 <= L; ++j1) {
    bool inside = false;
    for (int j2 = 0; j2 <= L; ++j2) {
      const bool attack2 = act(j1, j2) == 2u;
      if (attack2)
        inside = true;
      else if (inside)
        record(rep, {j1, j2}, "attack-2 region not upward closed in j2", 1.0);
    }
  }
  return rep;
}

StructureReport verify_general_threshold(const PolicyTable& policy) {
  const std::size_t n = checked_states(policy);
  const int m = policy.num_systems;
  const auto base = static_cast<std::size_t>(policy.base());
  StructureReport rep;
  std::size_t stride = 1;
  for (int i = 0; i < m; ++i, stride *= base) {
    // Lines along channel i start at every state whose i-th coordinate is 0.
    for (std::size_t start = 0; start < n; ++start) {
      if ((start / stride) % base != 0) continue;
      bool inside = false;
      for (std::size_t c = 0; c < base; ++c) {
        const std::size_t s = start + c * stride;
        const bool attacked = (policy.actions[s] >> i) & 1u;
        if (attacked) {
          inside = true;
        } else if (inside) {
          std::vector<int> coords(static_cast<std::size_t>(m));
          std::size_t f = s;
          for (auto& x : coords) {
            x = static_cast<int>(f % base);
            f /= base;
          }
          record(rep, std::move(coords),
                 "attack region of channel " + std::to_string(i) + " not upward closed", 1.0);
        }
      }
    }
  }
  return rep;
}

StructureReport verify_q_structure(const Eigen::VectorXd& q, int trunc, double rel_slack) {
  const int b = trunc + 1;
  if (q.size() != static_cast<Eigen::Index>(b) * b)
    throw std::invalid_argument("verify_q_structure requires a two-channel value table");
  const double slack = rel_slack * std::max(q.cwiseAbs().maxCoeff(), 0.0);
  auto at = [&](int j1, int j2) { return q[static_cast<Eigen::Index>(j1 + b * j2)]; };

  StructureReport rep;
  for (int a1 = 0; a1 < b; ++a1)
    for (int a2 = 0; a2 < b; ++a2)
      for (int b1 = 0; b1 < b; ++b1)
        for (int b2 = 0; b2 < b; ++b2) {
          const double qa = at(a1, a2);
          const double qb = at(b1, b2);
          if (a1 <= b1 && a2 <= b2) {
            const double gap = qa - qb;
            if (gap > slack)
              record(rep, {a1, a2, b1, b2}, "monotonicity: q(s) > q(s') with s <= s'", gap);
          }
          if (a1 < b1 && a2 > b2) {
            const double lhs = qa + qb;
            const double rhs = at(a1, b2) + at(b1, a2);
            if (rhs - lhs > slack)
              record(rep, {a1, a2, b1, b2}, "submodularity violated", rhs - lhs);
          }
        }
  return rep;
}

}  // namespace attack_alloc
