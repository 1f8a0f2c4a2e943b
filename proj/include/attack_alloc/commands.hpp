#pragma once

// Subcommand implementations behind the attack_alloc executable. Each command
// returns a process exit code and writes human-readable text (or JSON with
// Options::json) to `out`; diagnostics go to `err`.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "attack_alloc/config.hpp"
#include "attack_alloc/index.hpp"
#include "attack_alloc/mdp.hpp"
#include "attack_alloc/sim.hpp"

namespace attack_alloc::cli {

enum ExitCode : int { kOk = 0, kDomain = 1, kUsage = 2, kNonConvergence = 3 };

struct Options {
  std::filesystem::path config;
  std::filesystem::path out;  // empty: write no files
  std::optional<int> seeds;
  bool fixed_seeds = false;
  std::optional<long long> horizon;
  std::optional<int> trunc;
  int threads = 1;
  bool json = false;
};

/// Runs fn and maps exceptions to exit codes: ConfigError 2,
/// ConvergenceError 3, everything else 1.
int guarded(const std::function<int()>& fn, std::ostream& err);

int cmd_validate(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_solve(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_index(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_simulate(const Options& opts, std::ostream& out, std::ostream& err);
/// target: example1 | table1 | table2 | structure.
int cmd_reproduce(const std::string& target, const Options& opts, std::ostream& out,
                  std::ostream& err);

// Building blocks shared by the commands.

/// Config with command-line overrides applied.
ExperimentConfig resolve_config(const ExperimentConfig& base, const Options& opts);

struct PreparedCase {
  ExperimentConfig cfg;
  std::vector<SteadyStated> steady;
  std::vector<Channel> channels;
};

/// Validates every system (DomainError listing the failures) and computes the
/// steady states.
PreparedCase prepare_case(const ExperimentConfig& cfg);

/// Relative value iteration on the case; DomainError if the solver tables
/// would exceed the configured memory ceiling.
SolveResult solve_case(const PreparedCase& pc, int threads, std::optional<int> trunc = {});

std::vector<IndexTable> index_tables(const PreparedCase& pc);

SimConfig sim_config(const ExperimentConfig& cfg, int threads);

/// `optimal` needs `solved`; the other policies ignore it.
SimReport simulate_policy(const PreparedCase& pc, const std::string& policy,
                          const SolveResult* solved, const SimConfig& sim);

struct ExperimentRow {
  std::string case_id;
  std::string policy;
  double mean = 0.0;
  double stderr_ = 0.0;
  long long horizon = 0;
  int seeds = 0;
  std::string rng_id;
};

ExperimentRow experiment_row(const std::string& case_id, const SimReport& rep);
/// Columns: case_id, policy, mean, stderr, horizon, seeds, rng_id.
void write_experiments_csv(std::ostream& os, const std::vector<ExperimentRow>& rows,
                           const std::string& config_hash);

}  // namespace attack_alloc::cli
