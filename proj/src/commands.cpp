#include "attack_alloc/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "attack_alloc/errors.hpp"
#include "attack_alloc/export.hpp"
#include "attack_alloc/structure.hpp"
#include "json.hpp"

namespace attack_alloc::cli {

using nlohmann::json;

int guarded(const std::function<int()>& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (iterations " << e.iterations() << ", last measure "
        << e.last_measure() << ")\n";
    return kNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDomain;
  }
}

ExperimentConfig resolve_config(const ExperimentConfig& base, const Options& opts) {
  ExperimentConfig cfg = base;
  if (opts.trunc) {
    if (*opts.trunc < 1) throw ConfigError("--trunc must be at least 1");
    if (cfg.sim.clamp == cfg.trunc) cfg.sim.clamp = *opts.trunc;
    cfg.trunc = *opts.trunc;
  }
  if (opts.horizon) {
    if (*opts.horizon <= cfg.sim.burn_in)
      throw ConfigError("--horizon must exceed the burn-in (" + std::to_string(cfg.sim.burn_in) +
                        ")");
    cfg.sim.horizon = *opts.horizon;
  }
  if (opts.seeds) {
    if (*opts.seeds < 1) throw ConfigError("--seeds must be at least 1");
    cfg.sim.seeds = *opts.seeds;
  }
  return cfg;
}

PreparedCase prepare_case(const ExperimentConfig& cfg) {
  PreparedCase pc;
  pc.cfg = cfg;
  std::string problems;
  for (const auto& m : cfg.systems) {
    const auto rep = validate_model(m);
    for (const auto& v : rep.violations)
      if (v.check != "riccati_convergence")
        problems += "\n  " + m.name + ": " + v.check + ": " + v.message;
  }
  if (!problems.empty()) throw DomainError("model assumptions violated:" + problems);
  for (const auto& m : cfg.systems) {
    pc.steady.push_back(steady_state_covariance(m));
    pc.channels.push_back(Channel::from_model(m, pc.steady.back()));
  }
  return pc;
}

SolveResult solve_case(const PreparedCase& pc, int threads, std::optional<int> trunc) {
  const int L = trunc.value_or(pc.cfg.trunc);
  const int M = pc.cfg.num_systems();
  const auto bytes = static_cast<double>(solver_table_bytes(M, L));
  if (bytes > pc.cfg.memory_ceiling_bytes) {
    std::ostringstream os;
    os << std::setprecision(4) << "state space of " << std::pow(L + 1.0, M)
       << " states needs about " << bytes / (1024.0 * 1024 * 1024)
       << " GiB of solver tables, above the ceiling of "
       << pc.cfg.memory_ceiling_bytes / (1024.0 * 1024 * 1024) << " GiB";
    throw DomainError(os.str());
  }
  MdpProblem problem(pc.cfg.systems, pc.steady, pc.cfg.budget, L);
  RviOptions ro;
  ro.tol = pc.cfg.tolerances.vi_span;
  ro.threads = threads;
  return relative_value_iteration(problem, ro);
}

std::vector<IndexTable> index_tables(const PreparedCase& pc) {
  std::vector<IndexTable> out;
  for (std::size_t i = 0; i < pc.cfg.systems.size(); ++i)
    out.push_back(build_index_table(pc.cfg.systems[i], pc.steady[i], pc.cfg.index.j_cap,
                                    pc.cfg.tolerances.tail));
  return out;
}

SimConfig sim_config(const ExperimentConfig& cfg, int threads) {
  SimConfig sc;
  sc.horizon = cfg.sim.horizon;
  sc.burn_in = cfg.sim.burn_in;
  sc.seeds = default_seeds(cfg.sim.seeds);
  sc.clamp = cfg.sim.clamp;
  sc.threads = threads;
  return sc;
}

SimReport simulate_policy(const PreparedCase& pc, const std::string& policy,
                          const SolveResult* solved, const SimConfig& sim) {
  const int M = pc.cfg.num_systems();
  const int N = pc.cfg.budget;
  std::unique_ptr<Policy> p;
  if (policy == "optimal") {
    if (!solved) throw std::invalid_argument("optimal policy requested without a solve");
    p = tabular_policy(*solved);
  } else if (policy == "myopic") {
    p = std::make_unique<MyopicPolicy>(N);
  } else if (policy == "index") {
    p = std::make_unique<IndexPolicy>(index_tables(pc), N);
  } else if (policy == "random") {
    p = std::make_unique<RandomPolicy>(M, N);
  } else {
    throw ConfigError("unknown policy '" + policy + "'");
  }
  return evaluate_policy(pc.channels, N, *p, sim);
}

ExperimentRow experiment_row(const std::string& case_id, const SimReport& rep) {
  return {case_id,     rep.policy, rep.mean_reward, rep.stderr_, rep.horizon,
          static_cast<int>(rep.seeds.size()), rep.rng_id};
}

void write_experiments_csv(std::ostream& os, const std::vector<ExperimentRow>& rows,
                           const std::string& config_hash) {
  os << Provenance{config_hash, kRngId}.csv_comment() << '\n';
  os << "case_id,policy,mean,stderr,horizon,seeds,rng_id\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.case_id << ',' << r.policy << ',';
    std::snprintf(buf, sizeof buf, "%.10g,%.6g", r.mean, r.stderr_);
    os << buf << ',' << r.horizon << ',' << r.seeds << ',' << r.rng_id << '\n';
  }
}

namespace {

ExperimentConfig load_resolved(const Options& opts) {
  if (opts.config.empty()) throw ConfigError("--config is required");
  return resolve_config(load_config(opts.config), opts);
}

std::ofstream open_out(const Options& opts, const std::string& file) {
  std::filesystem::create_directories(opts.out);
  const auto path = opts.out / file;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  return os;
}

json sim_report_json(const SimReport& r) {
  return {{"policy", r.policy},         {"mean_reward", r.mean_reward},
          {"stderr", r.stderr_},        {"horizon", r.horizon},
          {"burn_in", r.burn_in},       {"clamp", r.clamp},
          {"seeds", r.seeds},           {"per_seed_means", r.per_seed_means},
          {"rng_id", r.rng_id}};
}

}  // namespace

int cmd_validate(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto cfg = load_resolved(opts);
        bool ok = true;
        json reports = json::array();
        for (const auto& m : cfg.systems) {
          const auto rep = validate_model(m);
          ok = ok && rep.ok();
          json v = json::array();
          for (const auto& x : rep.violations) v.push_back({{"check", x.check}, {"message", x.message}});
          reports.push_back({{"system", m.name},
                             {"ok", rep.ok()},
                             {"spectral_radius", rep.spectral_radius},
                             {"violations", v}});
          if (!opts.json) {
            out << m.name << ": " << (rep.ok() ? "ok" : "FAIL") << " (|A| = " << rep.spectral_radius
                << ")\n";
            for (const auto& x : rep.violations) out << "  " << x.check << ": " << x.message << '\n';
          }
        }
        if (cfg.budget >= cfg.num_systems() && cfg.num_systems() > 1 && !opts.json)
          out << "note: budget " << cfg.budget << " attacks every system\n";
        if (opts.json)
          out << json{{"config", cfg.name}, {"ok", ok}, {"config_hash", cfg.hash}, {"systems", reports}}
                     .dump(2)
              << '\n';
        return ok ? kOk : kDomain;
      },
      err);
}

int cmd_solve(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto pc = prepare_case(load_resolved(opts));
        const auto res = solve_case(pc, opts.threads);
        const Provenance prov{pc.cfg.hash, "none"};
        auto summary = solve_summary_json(res, prov);
        summary["case_id"] = pc.cfg.name;
        summary["budget"] = pc.cfg.budget;
        const MdpProblem problem(pc.cfg.systems, pc.steady, pc.cfg.budget, pc.cfg.trunc);
        summary["bellman_residual"] = bellman_residual(problem, res, opts.threads);
        if (pc.cfg.trunc > 1 && problem.num_states() <= (std::size_t{1} << 20)) {
          const auto prev = solve_case(pc, opts.threads, pc.cfg.trunc - 1);
          const double rel = std::abs(res.gain - prev.gain) / std::abs(prev.gain);
          summary["truncation_check"] = {{"gain_previous", prev.gain},
                                         {"relative_change", rel},
                                         {"tolerance", pc.cfg.tolerances.trunc_rel},
                                         {"pass", rel < pc.cfg.tolerances.trunc_rel}};
        }
        if (pc.cfg.num_systems() == 2 && pc.cfg.budget == 1) {
          const auto st = verify_threshold_structure(res.policy);
          summary["threshold_structure"] = {{"pass", st.pass},
                                            {"violations", st.violations.size()},
                                            {"critical_curve", st.critical_curve}};
        }
        if (!opts.out.empty()) {
          auto p = open_out(opts, "policy.csv");
          write_policy_csv(p, res.policy, prov);
          auto q = open_out(opts, "q.csv");
          write_q_csv(q, res, prov);
          auto s = open_out(opts, "summary.json");
          s << summary.dump(2) << '\n';
          if (pc.cfg.num_systems() == 2) {
            auto f = open_out(opts, "threshold_figure.csv");
            write_threshold_figure(f, res.policy, prov);
          }
        }
        if (opts.json) {
          out << summary.dump(2) << '\n';
        } else {
          out << std::setprecision(8) << pc.cfg.name << ": gain " << res.gain << " after "
              << res.iterations << " sweeps (span " << res.span_at_exit << ", trunc "
              << res.trunc << ", " << problem.num_states() << " states, "
              << problem.actions().size() << " actions)\n";
          if (summary.contains("truncation_check"))
            out << "  gain at trunc " << pc.cfg.trunc - 1 << ": "
                << summary["truncation_check"]["gain_previous"].get<double>()
                << ", relative change "
                << summary["truncation_check"]["relative_change"].get<double>() << '\n';
        }
        return kOk;
      },
      err);
}

int cmd_index(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto pc = prepare_case(load_resolved(opts));
        const auto tables = index_tables(pc);
        const Provenance prov{pc.cfg.hash, "none"};
        json systems = json::array();
        for (std::size_t i = 0; i < tables.size(); ++i) {
          const auto& m = pc.cfg.systems[i];
          const auto& t = tables[i];
          double worst = 0.0;
          std::vector<double> oracle;
          for (int j = 0; j <= t.j_max; ++j) {
            const double o = index_oracle(m, pc.steady[i], j, default_oracle_trunc(m, j),
                                          pc.cfg.index.oracle_tol);
            oracle.push_back(o);
            worst = std::max(worst, std::abs(t.values[static_cast<std::size_t>(j)] - o) /
                                        std::max(1.0, std::abs(o)));
          }
          const double top = t.j_max >= 0 ? t.values.back() : 1.0;
          std::vector<double> grid;
          for (int k = 0; k < 50; ++k) grid.push_back(2.0 * top * k / 49.0);
          const int arm_trunc = default_oracle_trunc(m, std::max(t.j_max, 0));
          const auto ixr = indexability_check(m, pc.steady[i], grid, arm_trunc);

          json wit = json::array();
          for (const auto& w : ixr.witnesses)
            wit.push_back({{"z_low", w.z_low}, {"z_high", w.z_high}, {"j", w.j}});
          json rows = json::array();
          for (int j = 0; j <= t.j_max; ++j)
            rows.push_back({{"j", j},
                            {"o_j", t.values[static_cast<std::size_t>(j)]},
                            {"oracle", oracle[static_cast<std::size_t>(j)]}});
          systems.push_back({{"system", m.name},
                             {"j_max", t.j_max},
                             {"first_unreliable", t.j_max + 1},
                             {"monotone", t.monotone},
                             {"max_oracle_rel_err", worst},
                             {"indexable", ixr.pass},
                             {"witnesses", wit},
                             {"values", rows}});

          if (!opts.out.empty()) {
            auto os = open_out(opts, "index_" + std::to_string(i + 1) + ".csv");
            os << prov.csv_comment() << '\n' << "j,o_j,reliable_flag,oracle,rel_err\n";
            os << std::setprecision(12);
            for (int j = 0; j <= pc.cfg.index.j_cap; ++j) {
              if (j <= t.j_max) {
                const double o = oracle[static_cast<std::size_t>(j)];
                const double v = t.values[static_cast<std::size_t>(j)];
                os << j << ',' << v << ",1," << o << ','
                   << std::abs(v - o) / std::max(1.0, std::abs(o)) << '\n';
              } else {
                os << j << ",,0,,\n";
              }
            }
          }
          if (!opts.json) {
            out << m.name << ": reliable for j <= " << t.j_max << ", "
                << (t.monotone ? "monotone" : "NOT monotone") << ", max oracle rel err "
                << std::setprecision(3) << worst << ", indexability "
                << (ixr.pass ? "pass" : "FAIL") << " (" << ixr.witnesses.size()
                << " witnesses)\n";
          }
        }
        const json report{{"case_id", pc.cfg.name},
                          {"systems", systems},
                          {"provenance", prov.to_json()}};
        if (!opts.out.empty()) {
          auto os = open_out(opts, "index_report.json");
          os << report.dump(2) << '\n';
        }
        if (opts.json) out << report.dump(2) << '\n';
        return kOk;
      },
      err);
}

int cmd_simulate(const Options& opts, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const auto pc = prepare_case(load_resolved(opts));
        const auto sc = sim_config(pc.cfg, opts.threads);
        std::optional<SolveResult> solved;
        std::vector<ExperimentRow> rows;
        json reports = json::array();
        for (const auto& name : pc.cfg.policies) {
          if (name == "optimal" && !solved) solved = solve_case(pc, opts.threads);
          const auto rep = simulate_policy(pc, name, solved ? &*solved : nullptr, sc);
          rows.push_back(experiment_row(pc.cfg.name, rep));
          reports.push_back(sim_report_json(rep));
          if (!opts.json)
            out << std::setprecision(8) << pc.cfg.name << " " << name << ": mean "
                << rep.mean_reward << " stderr " << std::setprecision(3) << rep.stderr_ << '\n';
        }
        if (!opts.out.empty()) {
          auto os = open_out(opts, "experiments.csv");
          write_experiments_csv(os, rows, pc.cfg.hash);
        }
        if (opts.json)
          out << json{{"case_id", pc.cfg.name},
                      {"reports", reports},
                      {"provenance", Provenance{pc.cfg.hash, kRngId}.to_json()}}
                     .dump(2)
              << '\n';
        return kOk;
      },
      err);
}

}  // namespace attack_alloc::cli
