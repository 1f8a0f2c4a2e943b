#pragma once

// CSV/JSON writers for solver and index artifacts. Every file starts with a
// provenance record: CSV files with a leading "# key=value ..." comment line,
// JSON documents with a "provenance" object.

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "attack_alloc/mdp.hpp"

namespace attack_alloc {

struct Provenance {
  std::string config_hash;
  std::string rng_id;
  std::string tool_version = ATTACK_ALLOC_VERSION;

  std::string csv_comment() const;
  nlohmann::json to_json() const;
};

/// Columns: j_1..j_M, attack_set (sorted 1-based channel numbers joined by ';').
void write_policy_csv(std::ostream& os, const PolicyTable& policy, const Provenance& prov);
/// Inverse of write_policy_csv; comment lines are skipped.
PolicyTable read_policy_csv(std::istream& is);

/// Columns: j_1..j_M, q.
void write_q_csv(std::ostream& os, const SolveResult& result, const Provenance& prov);

/// {gain, iterations, span_at_exit, trunc, ...}.
nlohmann::json solve_summary_json(const SolveResult& result, const Provenance& prov);

/// Two channels: rows j1, j2, action with action 1 = attack channel 1 and
/// 2 = attack channel 2.
void write_threshold_figure(std::ostream& os, const PolicyTable& policy,
                            const Provenance& prov);

}  // namespace attack_alloc
