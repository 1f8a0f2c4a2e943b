#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "attack_alloc/config.hpp"
#include "attack_alloc/errors.hpp"
#include "fixtures.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ATTACK_ALLOC_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string config(const std::string& name) { return std::string(ATTACK_ALLOC_CONFIG_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const auto p = fs::path(TEST_WORK_DIR) / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("validate exit codes") {
  CHECK(run("validate --config " + config("example1.json")).code == 0);
  const auto bad = run("validate --config " + config("invalid_rates.json"));
  CHECK(bad.code == 1);
  CHECK(bad.out.find("rate_ordering") != std::string::npos);

  const auto dir = scratch("validate");
  write(dir / "broken.json", "{\n  \"systems\": [\n    {\"A\": [[1.2]],,\n");
  const auto parse = run("validate --config " + (dir / "broken.json").string());
  CHECK(parse.code == 2);
  CHECK(parse.out.find("line 3") != std::string::npos);

  write(dir / "typo.json", R"({"systems": [{"A": [[1.2]], "C": [[1]], "Q": [[1]], "R": [[1]],
    "eps": 0.9, "eps_atacked": 0.5}], "budget": 1, "trunc": 5})");
  const auto typo = run("validate --config " + (dir / "typo.json").string());
  CHECK(typo.code == 2);
  CHECK(typo.out.find("systems[0].eps_atacked") != std::string::npos);

  CHECK(run("validate").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("simulate --config " + config("example1.json") + " --seeds many").code == 2);
  CHECK(run("reproduce table9").code == 2);
}

TEST_CASE("config parsing") {
  using attack_alloc::ConfigError;
  const auto cfg = attack_alloc::load_config(config("table2_case3.json"));
  CHECK(cfg.num_systems() == 5);
  CHECK(cfg.systems[0].eps == 0.95);
  CHECK(cfg.systems[2].eps == 0.9);
  CHECK(cfg.budget == 2);
  CHECK(cfg.trunc == 12);
  CHECK(cfg.sim.clamp == 12);
  CHECK(cfg.hash.size() == 16);
  CHECK(attack_alloc::load_config(config("table2_case3.json")).hash == cfg.hash);
  CHECK_THROWS_AS(attack_alloc::parse_config(R"({"systems": [], "budget": 1, "trunc": 3})"), ConfigError);
  CHECK_THROWS_AS(attack_alloc::parse_config(R"({"systems": [{"A": [[1, 2], [3]], "C": [[1]],
      "Q": [[1]], "R": [[1]], "eps": 0.9, "eps_attacked": 0.5}], "budget": 1, "trunc": 3})"),
                  ConfigError);
  CHECK(attack_alloc::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(attack_alloc::fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("solve writes artifacts with provenance") {
  const auto dir = scratch("solve_example1");
  const auto r = run("solve --config " + config("example1.json") + " --out " + dir.string());
  REQUIRE(r.code == 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(std::abs(summary["gain"].get<double>() - 50.21) / 50.21 < 0.01);
  CHECK(summary["provenance"]["config_hash"].get<std::string>().size() == 16);
  CHECK(summary["threshold_structure"]["pass"].get<bool>());
  for (const char* f : {"policy.csv", "q.csv", "threshold_figure.csv"}) {
    const auto text = slurp(dir / f);
    CHECK(text.rfind("# tool=attack_alloc", 0) == 0);
  }
  CHECK(slurp(dir / "threshold_figure.csv").find("j1,j2,action\n0,0,") != std::string::npos);
}

TEST_CASE("degenerate single-channel solve") {
  const auto m = fixtures::system2();
  const int L = 19;
  const auto tr = fixtures::traces(m, L + 1);
  double expected = 0;
  for (int j = 0; j < L; ++j) expected += m.eps_attacked * std::pow(1 - m.eps_attacked, j) * tr[j];
  expected += std::pow(1 - m.eps_attacked, L) * tr[L];
  const auto r = run("solve --json --config " + config("degenerate_single.json"));
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["gain"].get<double>() == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("memory ceiling refusal") {
  const auto dir = scratch("ceiling");
  auto doc = nlohmann::json::parse(slurp(config("table1_case3.json")));
  doc["memory_ceiling_gib"] = 0.001;
  write(dir / "small.json", doc.dump());
  const auto r = run("solve --config " + (dir / "small.json").string());
  CHECK(r.code == 1);
  CHECK(r.out.find("GiB") != std::string::npos);
}

TEST_CASE("non-convergent Riccati iteration exits 3") {
  const auto dir = scratch("riccati");
  write(dir / "blind.json", R"({"systems": [
    {"A": [[1.2, 0.2], [0.3, 1.0]], "C": [[0.0, 0.0]], "Q": [[2, 0], [0, 1]], "R": [[1]],
     "eps": 0.95, "eps_attacked": 0.5}], "budget": 1, "trunc": 5})");
  CHECK(run("solve --config " + (dir / "blind.json").string()).code == 3);
}

TEST_CASE("index command writes flagged tables") {
  const auto dir = scratch("index_example1");
  const auto r = run("index --config " + config("example1.json") + " --out " + dir.string());
  REQUIRE(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "index_report.json"));
  CHECK(report["systems"][0]["first_unreliable"].get<int>() == 13);
  CHECK(report["systems"][1]["first_unreliable"].get<int>() == 17);
  CHECK(report["systems"][0]["indexable"].get<bool>());
  CHECK(report["systems"][0]["max_oracle_rel_err"].get<double>() < 1e-3);
  const auto csv = slurp(dir / "index_1.csv");
  CHECK(csv.find("j,o_j,reliable_flag,oracle,rel_err\n") != std::string::npos);
  CHECK(csv.find("\n13,,0,,\n") != std::string::npos);
  CHECK(csv.find("\n12,") != std::string::npos);
}

TEST_CASE("homogeneous pair gives identical index tables") {
  const auto dir = scratch("index_homog");
  REQUIRE(run("index --config " + config("table1_case1.json") + " --out " + dir.string()).code == 0);
  auto body = [](std::string s) { return s.substr(s.find('\n')); };
  CHECK(body(slurp(dir / "index_1.csv")) == body(slurp(dir / "index_2.csv")));
}

TEST_CASE("simulate is deterministic for fixed seeds") {
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  const std::string args = "simulate --config " + config("example1.json") + " --horizon 20000 --seeds 3";
  REQUIRE(run(args + " --out " + a.string()).code == 0);
  REQUIRE(run(args + " --threads 2 --out " + b.string()).code == 0);
  const auto text = slurp(a / "experiments.csv");
  CHECK(text == slurp(b / "experiments.csv"));
  CHECK(text.find("case_id,policy,mean,stderr,horizon,seeds,rng_id\n") != std::string::npos);
  CHECK(text.find("example1,optimal,") != std::string::npos);
  CHECK(text.find("example1,random,") != std::string::npos);

  const auto j = run(args + " --json");
  REQUIRE(j.code == 0);
  const auto doc = nlohmann::json::parse(j.out);
  CHECK(doc["reports"].size() == 4);
  CHECK(doc["reports"][0]["per_seed_means"].size() == 3);
}

TEST_CASE("reproduce structure passes") {
  const auto r = run("reproduce structure");
  CHECK(r.code == 0);
  CHECK(r.out.find("reproduce structure: PASS") != std::string::npos);
}
