#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "attack_alloc/commands.hpp"
#include "attack_alloc/parallel.hpp"

namespace cli = attack_alloc::cli;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string seeds;
  long long horizon = 0;
  int trunc = 0;
  int threads = attack_alloc::default_thread_count();
  bool json = false;
};

void add_common(CLI::App* sub, Flags& f, bool needs_config) {
  auto* c = sub->add_option("--config", f.config, "experiment config (JSON)");
  if (needs_config) c->required();
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--seeds", f.seeds, "number of simulation seeds, or 'fixed'");
  sub->add_option("--horizon", f.horizon, "simulation horizon in steps")
      ->check(CLI::PositiveNumber);
  sub->add_option("--trunc", f.trunc, "truncation level")->check(CLI::PositiveNumber);
  sub->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_flag("--json", f.json, "machine-readable output on stdout");
}

cli::Options to_options(const Flags& f, const CLI::App& sub) {
  cli::Options o;
  o.config = f.config;
  o.out = f.out;
  if (sub.count("--horizon")) o.horizon = f.horizon;
  if (sub.count("--trunc")) o.trunc = f.trunc;
  o.threads = f.threads;
  o.json = f.json;
  if (!f.seeds.empty()) {
    if (f.seeds == "fixed") {
      o.fixed_seeds = true;
    } else {
      std::size_t pos = 0;
      int k = 0;
      try {
        k = std::stoi(f.seeds, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != f.seeds.size() || k < 1)
        throw CLI::ValidationError("--seeds", "expected a positive integer or 'fixed'");
      o.seeds = k;
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal DoS attack allocation against remote state estimation"};
  app.set_version_flag("--version", std::string(ATTACK_ALLOC_VERSION));
  app.require_subcommand(1);

  Flags f;
  std::string target;
  auto* validate = app.add_subcommand("validate", "check model assumptions of every system");
  auto* solve = app.add_subcommand("solve", "optimal policy by relative value iteration");
  auto* index = app.add_subcommand("index", "index tables, oracle cross-check, indexability");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of policies");
  auto* reproduce = app.add_subcommand("reproduce", "rerun a bundled experiment and score it");
  for (auto* s : {validate, solve, index, simulate}) add_common(s, f, true);
  add_common(reproduce, f, false);
  reproduce->add_option("target", target, "example1 | table1 | table2 | structure")
      ->required()
      ->check(CLI::IsMember({"example1", "table1", "table2", "structure"}));

  cli::Options opts;
  try {
    app.parse(argc, argv);
    for (auto* s : app.get_subcommands()) opts = to_options(f, *s);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kUsage;
  }

  if (validate->parsed()) return cli::cmd_validate(opts, std::cout, std::cerr);
  if (solve->parsed()) return cli::cmd_solve(opts, std::cout, std::cerr);
  if (index->parsed()) return cli::cmd_index(opts, std::cout, std::cerr);
  if (simulate->parsed()) return cli::cmd_simulate(opts, std::cout, std::cerr);
  return cli::cmd_reproduce(target, opts, std::cout, std::cerr);
}
