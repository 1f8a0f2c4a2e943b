#include "attack_alloc/export.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "attack_alloc/errors.hpp"

namespace attack_alloc {

std::string Provenance::csv_comment() const {
  return "# tool=attack_alloc version=" + tool_version + " config_hash=" + config_hash +
         " rng=" + rng_id;
}

nlohmann::json Provenance::to_json() const {
  return {{"tool", "attack_alloc"},
          {"version", tool_version},
          {"config_hash", config_hash},
          {"rng", rng_id}};
}

namespace {

void write_header(std::ostream& os, int m, const std::string& last) {
  for (int i = 0; i < m; ++i) os << "j_" << (i + 1) << ',';
  os << last << '\n';
}

// Walks the grid in flat order, keeping the decoded coordinates current.
template <typename Fn>
void for_each_state(int m, int base, std::size_t n, Fn&& fn) {
  std::vector<int> c(static_cast<std::size_t>(m), 0);
  for (std::size_t s = 0; s < n; ++s) {
    fn(s, c);
    for (int i = 0; i < m; ++i) {
      if (++c[static_cast<std::size_t>(i)] < base) break;
      c[static_cast<std::size_t>(i)] = 0;
    }
  }
}

std::string join_attack(AttackSet a) {
  std::string out;
  for (int i : attack_indices(a)) {
    if (!out.empty()) out += ';';
    out += std::to_string(i + 1);
  }
  return out;
}

}  // namespace

void write_policy_csv(std::ostream& os, const PolicyTable& policy, const Provenance& prov) {
  os << prov.csv_comment() << '\n';
  write_header(os, policy.num_systems, "attack_set");
  for_each_state(policy.num_systems, policy.base(), policy.actions.size(),
                 [&](std::size_t s, const std::vector<int>& c) {
                   for (int x : c) os << x << ',';
                   os << join_attack(policy.actions[s]) << '\n';
                 });
}

PolicyTable read_policy_csv(std::istream& is) {
  std::string line;
  PolicyTable p;
  bool have_header = false;
  std::size_t line_no = 0;
  int max_coord = 0;
  std::vector<std::pair<std::vector<int>, AttackSet>> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (!have_header) {
      have_header = true;
      p.num_systems = static_cast<int>(fields.size()) - 1;
      if (p.num_systems < 1 || fields.back() != "attack_set")
        throw ConfigError("policy CSV: bad header on line " + std::to_string(line_no));
      continue;
    }
    if (static_cast<int>(fields.size()) != p.num_systems + 1)
      throw ConfigError("policy CSV: wrong field count on line " + std::to_string(line_no));
    std::vector<int> coords;
    try {
      for (int i = 0; i < p.num_systems; ++i) {
        coords.push_back(std::stoi(fields[static_cast<std::size_t>(i)]));
        if (coords.back() < 0) throw std::invalid_argument("negative");
        max_coord = std::max(max_coord, coords.back());
      }
      AttackSet a = 0;
      std::stringstream as(fields.back());
      std::string idx;
      while (std::getline(as, idx, ';')) {
        if (idx.empty()) continue;
        const int k = std::stoi(idx) - 1;
        const int arr[1] = {k};
        a |= attack_mask(arr);
      }
      rows.emplace_back(std::move(coords), a);
    } catch (const std::exception&) {
      throw ConfigError("policy CSV: unparsable value on line " + std::to_string(line_no));
    }
  }
  if (!have_header) throw ConfigError("policy CSV: empty input");
  p.trunc = max_coord;
  std::size_t n = 1;
  for (int i = 0; i < p.num_systems; ++i) n *= static_cast<std::size_t>(p.base());
  if (rows.size() != n) throw ConfigError("policy CSV: grid is incomplete");
  p.actions.assign(n, 0);
  std::vector<bool> seen(n, false);
  for (auto& [coords, a] : rows) {
    const auto f = p.flat(coords);
    if (seen[f]) throw ConfigError("policy CSV: duplicate state");
    seen[f] = true;
    p.actions[f] = a;
  }
  return p;
}

void write_q_csv(std::ostream& os, const SolveResult& result, const Provenance& prov) {
  os << prov.csv_comment() << '\n';
  const auto& p = result.policy;
  write_header(os, p.num_systems, "q");
  os.precision(17);
  for_each_state(p.num_systems, p.base(), static_cast<std::size_t>(result.q.size()),
                 [&](std::size_t s, const std::vector<int>& c) {
                   for (int x : c) os << x << ',';
                   os << result.q[static_cast<Eigen::Index>(s)] << '\n';
                 });
}

nlohmann::json solve_summary_json(const SolveResult& result, const Provenance& prov) {
  return {{"gain", result.gain},
          {"iterations", result.iterations},
          {"span_at_exit", result.span_at_exit},
          {"trunc", result.trunc},
          {"systems", result.policy.num_systems},
          {"provenance", prov.to_json()}};
}

void write_threshold_figure(std::ostream& os, const PolicyTable& policy,
                            const Provenance& prov) {
  if (policy.num_systems != 2)
    throw std::invalid_argument("threshold figure data needs two channels");
  os << prov.csv_comment() << '\n';
  os << "j1,j2,action\n";
  for_each_state(2, policy.base(), policy.actions.size(),
                 [&](std::size_t s, const std::vector<int>& c) {
                   os << c[0] << ',' << c[1] << ',' << join_attack(policy.actions[s]) << '\n';
                 });
}

}  // namespace attack_alloc
