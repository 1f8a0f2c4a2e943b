#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "attack_alloc/commands.hpp"
#include "attack_alloc/errors.hpp"
#include "attack_alloc/export.hpp"
#include "attack_alloc/structure.hpp"
#include "json.hpp"

namespace attack_alloc::cli {

namespace {

struct Check {
  std::string name;
  double expected = 0.0;
  double got = 0.0;
  double tol = 0.0;
  bool relative = true;
  bool pass = false;
};

Check compare(std::string name, double expected, double got, double tol, bool relative) {
  Check c{std::move(name), expected, got, tol, relative, false};
  const double d = std::abs(got - expected);
  c.pass = relative ? d <= tol * std::abs(expected) : d <= tol;
  return c;
}

// expected holds an upper bound on got.
Check at_most(std::string name, double bound, double got) {
  return {std::move(name), bound, got, 0.0, false, got <= bound};
}

struct Board {
  std::vector<Check> checks;
  std::vector<ExperimentRow> rows;
  std::string hash;

  void add(Check c) { checks.push_back(std::move(c)); }
  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

std::string fmt(double x, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string delta_text(const Check& c) {
  if (c.tol == 0.0 && !c.relative) return "bound " + fmt(c.expected);
  if (c.relative) {
    const double d = c.expected != 0.0 ? (c.got - c.expected) / std::abs(c.expected) : c.got;
    return "delta " + fmt(100.0 * d, "%+.3f") + "% tol " + fmt(100.0 * c.tol, "%.3g") + "%";
  }
  return "delta " + fmt(c.got - c.expected, "%+.3g") + " tol " + fmt(c.tol, "%.3g");
}

PreparedCase load_case(const std::string& file, const Options& opts) {
  return prepare_case(resolve_config(load_config(bundled_config_dir() / file), opts));
}

SimConfig reproduce_sim(const PreparedCase& pc, const Options& opts) {
  return sim_config(pc.cfg, opts.threads);
}

ExperimentRow mdp_row(const std::string& case_id, const SolveResult& r) {
  return {case_id, "mdp", r.gain, 0.0, 0, 0, "none"};
}

void run_example1(Board& b, const Options& opts) {
  const auto pc = load_case("example1.json", opts);
  b.hash = pc.cfg.hash;
  const double P1[2][2] = {{0.79, 0.54}, {0.54, 8.0}};
  const double P2[2][2] = {{1.54, -0.49}, {-0.49, 11.87}};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) {
      const auto idx = "[" + std::to_string(r) + "," + std::to_string(c) + "]";
      b.add(compare("example1/P1" + idx, P1[r][c], pc.steady[0].P_hat(r, c), 0.01, false));
      b.add(compare("example1/P2" + idx, P2[r][c], pc.steady[1].P_hat(r, c), 0.01, false));
    }
  const auto res = solve_case(pc, opts.threads);
  b.add(compare("example1/gain", 50.21, res.gain, 0.01, true));
  b.rows.push_back(mdp_row(pc.cfg.name, res));
}

void run_table(Board& b, const Options& opts, const std::vector<std::string>& files,
               const std::vector<double>& mdp, const std::string& heuristic,
               const std::vector<double>& heur, const std::vector<double>& random,
               double gap_tol) {
  std::string hashes;
  for (std::size_t k = 0; k < files.size(); ++k) {
    const auto pc = load_case(files[k], opts);
    hashes += pc.cfg.hash;
    const auto& id = pc.cfg.name;
    const auto res = solve_case(pc, opts.threads);
    const auto sim = reproduce_sim(pc, opts);
    const auto h = simulate_policy(pc, heuristic, nullptr, sim);
    const auto r = simulate_policy(pc, "random", nullptr, sim);
    b.rows.push_back(mdp_row(id, res));
    b.rows.push_back(experiment_row(id, h));
    b.rows.push_back(experiment_row(id, r));
    b.add(compare(id + "/mdp", mdp[k], res.gain, 0.02, true));
    b.add(compare(id + "/" + heuristic, heur[k], h.mean_reward, 0.02, true));
    b.add(compare(id + "/random", random[k], r.mean_reward, 0.05, true));
    b.add(at_most(id + "/" + heuristic + "_gap", gap_tol,
                  (res.gain - h.mean_reward) / res.gain));
  }
  b.hash = fnv1a_hex(hashes);
}

void run_structure(Board& b, const Options& opts) {
  const auto pc = load_case("example1.json", opts);
  b.hash = pc.cfg.hash;
  const auto res = solve_case(pc, opts.threads);
  const auto th = verify_threshold_structure(res.policy);
  b.add(at_most("structure/threshold_violations", 0, static_cast<double>(th.violations.size())));
  const auto qs = verify_q_structure(res.q, res.trunc);
  b.add(at_most("structure/q_violations", 0, static_cast<double>(qs.violations.size())));
  const auto tables = index_tables(pc);
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& m = pc.cfg.systems[i];
    const double top = tables[i].values.back();
    std::vector<double> grid;
    for (int k = 0; k < 50; ++k) grid.push_back(2.0 * top * k / 49.0);
    const auto ix = indexability_check(m, pc.steady[i], grid,
                                       default_oracle_trunc(m, tables[i].j_max));
    b.add(at_most("structure/indexability_witnesses_" + std::to_string(i + 1), 0,
                  static_cast<double>(ix.witnesses.size())));
  }
}

}  // namespace

int cmd_reproduce(const std::string& target, const Options& opts, std::ostream& out,
                  std::ostream& err) {
  return guarded(
      [&] {
        Board b;
        if (target == "example1") {
          run_example1(b, opts);
        } else if (target == "table1") {
          run_table(b, opts, {"table1_case1.json", "table1_case2.json", "table1_case3.json"},
                    {40.98, 71.49, 93.75}, "myopic", {40.82, 71.37, 93.46},
                    {29.94, 55.91, 71.45}, 0.02);
        } else if (target == "table2") {
          run_table(b, opts,
                    {"table2_case1.json", "table2_case2.json", "table2_case3.json",
                     "table2_case4.json"},
                    {44.88, 80.50, 106.37, 136.22}, "index", {42.72, 78.97, 103.4, 131.94},
                    {28.15, 51.97, 69.03, 84.5}, 0.05);
        } else if (target == "structure") {
          run_structure(b, opts);
        } else {
          throw ConfigError("unknown reproduce target '" + target +
                            "' (expected example1, table1, table2 or structure)");
        }

        if (!opts.out.empty()) {
          std::filesystem::create_directories(opts.out);
          const Provenance prov{b.hash, kRngId};
          if (!b.rows.empty()) {
            std::ofstream os(opts.out / "experiments.csv");
            write_experiments_csv(os, b.rows, b.hash);
          }
          std::ofstream sb(opts.out / "scoreboard.csv");
          sb << prov.csv_comment() << '\n' << "check,expected,got,tol,relative,pass\n";
          for (const auto& c : b.checks)
            sb << c.name << ',' << fmt(c.expected, "%.10g") << ',' << fmt(c.got, "%.10g") << ','
               << fmt(c.tol) << ',' << (c.relative ? 1 : 0) << ',' << (c.pass ? 1 : 0) << '\n';
        }

        if (opts.json) {
          nlohmann::json arr = nlohmann::json::array();
          for (const auto& c : b.checks)
            arr.push_back({{"check", c.name},
                           {"expected", c.expected},
                           {"got", c.got},
                           {"tol", c.tol},
                           {"relative", c.relative},
                           {"pass", c.pass}});
          out << nlohmann::json{{"target", target}, {"pass", b.pass()}, {"checks", arr}}.dump(2)
              << '\n';
        } else {
          for (const auto& c : b.checks)
            out << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(40) << c.name
                << " expected " << std::setw(10) << fmt(c.expected) << " got " << std::setw(12)
                << fmt(c.got, "%.8g") << ' ' << delta_text(c) << '\n';
          int failed = 0;
          for (const auto& c : b.checks) failed += c.pass ? 0 : 1;
          out << "reproduce " << target << ": " << (b.pass() ? "PASS" : "FAIL") << " ("
              << b.checks.size() - static_cast<std::size_t>(failed) << "/" << b.checks.size()
              << " checks)\n";
        }
        return b.pass() ? kOk : kDomain;
      },
      err);
}

}  // namespace attack_alloc::cli
