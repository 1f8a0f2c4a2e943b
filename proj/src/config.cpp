#include "attack_alloc/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "attack_alloc/errors.hpp"
#include "json.hpp"

namespace attack_alloc {

using nlohmann::json;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path bundled_config_dir() {
  if (const char* env = std::getenv("ATTACK_ALLOC_CONFIG_DIR"); env && *env) return env;
  return ATTACK_ALLOC_CONFIG_DIR;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("field '" + path + "': " + msg);
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items())
    if (!allowed.contains(k)) fail(path.empty() ? k : path + "." + k, "unknown key");
}

const json& require(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path.empty() ? key : path + "." + key, "missing");
  return obj.at(key);
}

double as_real(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

long long as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  return v.get<long long>();
}

MatrixX<double> as_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = v.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = v[r];
    const auto rp = path + "[" + std::to_string(r) + "]";
    if (!row.is_array() || row.empty()) fail(rp, "expected a non-empty array of numbers");
    if (r == 0) cols = row.size();
    if (row.size() != cols) fail(rp, "ragged matrix row");
  }
  MatrixX<double> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          as_real(v[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
  return m;
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& default_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::string what = e.what();
    const auto colon = what.rfind(": ");
    throw ConfigError("JSON parse error at " + line_col(text, e.byte > 0 ? e.byte - 1 : 0) +
                      ": " + (colon == std::string::npos ? what : what.substr(colon + 2)));
  }
  if (!doc.is_object()) fail("<root>", "expected an object");
  only_keys(doc, "", {"name", "systems", "budget", "trunc", "weights", "policies", "sim",
                      "tolerances", "index", "memory_ceiling_gib", "description"});

  ExperimentConfig cfg;
  cfg.name = default_name;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) fail("name", "expected a string");
    cfg.name = doc["name"].get<std::string>();
  }

  const auto& systems = require(doc, "", "systems");
  if (!systems.is_array() || systems.empty()) fail("systems", "expected a non-empty array");
  for (std::size_t k = 0; k < systems.size(); ++k) {
    const auto p = "systems[" + std::to_string(k) + "]";
    const auto& s = systems[k];
    if (!s.is_object()) fail(p, "expected an object");
    only_keys(s, p, {"name", "A", "C", "Q", "R", "eps", "eps_attacked", "weight", "repeat"});
    SystemModeld m;
    m.name = s.contains("name") && s["name"].is_string() ? s["name"].get<std::string>()
                                                         : "system" + std::to_string(k + 1);
    m.A = as_matrix(require(s, p, "A"), p + ".A");
    m.C = as_matrix(require(s, p, "C"), p + ".C");
    m.Q = as_matrix(require(s, p, "Q"), p + ".Q");
    m.R = as_matrix(require(s, p, "R"), p + ".R");
    m.eps = as_real(require(s, p, "eps"), p + ".eps");
    m.eps_attacked = as_real(require(s, p, "eps_attacked"), p + ".eps_attacked");
    if (s.contains("weight")) m.weight = as_real(s["weight"], p + ".weight");
    try {
      check_dimensions(m);
    } catch (const std::invalid_argument& e) {
      fail(p, e.what());
    }
    long long repeat = 1;
    if (s.contains("repeat")) repeat = as_int(s["repeat"], p + ".repeat");
    if (repeat < 1) fail(p + ".repeat", "must be at least 1");
    for (long long r = 0; r < repeat; ++r) {
      cfg.systems.push_back(m);
      if (repeat > 1) cfg.systems.back().name += "_" + std::to_string(r + 1);
    }
  }
  if (cfg.systems.size() > 63) fail("systems", "at most 63 systems are supported");

  cfg.budget = static_cast<int>(as_int(require(doc, "", "budget"), "budget"));
  if (cfg.budget < 1 || cfg.budget > cfg.num_systems())
    fail("budget", "must satisfy 1 <= budget <= number of systems (" +
                       std::to_string(cfg.num_systems()) + ")");
  cfg.trunc = static_cast<int>(as_int(require(doc, "", "trunc"), "trunc"));
  if (cfg.trunc < 1) fail("trunc", "must be at least 1");

  if (doc.contains("weights")) {
    const auto& w = doc["weights"];
    if (!w.is_array() || w.size() != cfg.systems.size())
      fail("weights", "expected one weight per system (" + std::to_string(cfg.systems.size()) +
                          ")");
    for (std::size_t i = 0; i < w.size(); ++i)
      cfg.systems[i].weight = as_real(w[i], "weights[" + std::to_string(i) + "]");
  }

  if (doc.contains("policies")) {
    const auto& pol = doc["policies"];
    if (!pol.is_array()) fail("policies", "expected an array of strings");
    for (std::size_t i = 0; i < pol.size(); ++i) {
      const auto p = "policies[" + std::to_string(i) + "]";
      if (!pol[i].is_string()) fail(p, "expected a string");
      const auto name = pol[i].get<std::string>();
      if (name != "optimal" && name != "myopic" && name != "index" && name != "random")
        fail(p, "unknown policy '" + name + "'");
      cfg.policies.push_back(name);
    }
  } else {
    cfg.policies = {"optimal", "myopic", "index", "random"};
  }

  cfg.sim.clamp = cfg.trunc;
  if (doc.contains("sim")) {
    const auto& s = doc["sim"];
    if (!s.is_object()) fail("sim", "expected an object");
    only_keys(s, "sim", {"horizon", "burn_in", "seeds", "clamp"});
    if (s.contains("horizon")) cfg.sim.horizon = as_int(s["horizon"], "sim.horizon");
    if (s.contains("burn_in")) cfg.sim.burn_in = as_int(s["burn_in"], "sim.burn_in");
    if (s.contains("seeds")) cfg.sim.seeds = static_cast<int>(as_int(s["seeds"], "sim.seeds"));
    if (s.contains("clamp")) {
      const auto& c = s["clamp"];
      if (c.is_boolean())
        cfg.sim.clamp = c.get<bool>() ? cfg.trunc : -1;
      else
        cfg.sim.clamp = static_cast<int>(as_int(c, "sim.clamp"));
    }
    if (cfg.sim.burn_in < 0 || cfg.sim.horizon <= cfg.sim.burn_in)
      fail("sim", "need horizon > burn_in >= 0");
    if (cfg.sim.seeds < 1) fail("sim.seeds", "must be at least 1");
  }

  if (doc.contains("tolerances")) {
    const auto& t = doc["tolerances"];
    if (!t.is_object()) fail("tolerances", "expected an object");
    only_keys(t, "tolerances", {"vi_span", "trunc_rel", "tail"});
    if (t.contains("vi_span")) cfg.tolerances.vi_span = as_real(t["vi_span"], "tolerances.vi_span");
    if (t.contains("trunc_rel"))
      cfg.tolerances.trunc_rel = as_real(t["trunc_rel"], "tolerances.trunc_rel");
    if (t.contains("tail")) cfg.tolerances.tail = as_real(t["tail"], "tolerances.tail");
    if (!(cfg.tolerances.vi_span > 0) || !(cfg.tolerances.trunc_rel > 0) ||
        !(cfg.tolerances.tail > 0))
      fail("tolerances", "all tolerances must be positive");
  }

  if (doc.contains("index")) {
    const auto& ix = doc["index"];
    if (!ix.is_object()) fail("index", "expected an object");
    only_keys(ix, "index", {"j_cap", "oracle_tol"});
    if (ix.contains("j_cap")) cfg.index.j_cap = static_cast<int>(as_int(ix["j_cap"], "index.j_cap"));
    if (ix.contains("oracle_tol"))
      cfg.index.oracle_tol = as_real(ix["oracle_tol"], "index.oracle_tol");
    if (cfg.index.j_cap < 0) fail("index.j_cap", "must be nonnegative");
  }

  if (doc.contains("memory_ceiling_gib")) {
    const double g = as_real(doc["memory_ceiling_gib"], "memory_ceiling_gib");
    if (!(g > 0)) fail("memory_ceiling_gib", "must be positive");
    cfg.memory_ceiling_bytes = g * 1024 * 1024 * 1024;
  }

  cfg.hash = fnv1a_hex(doc.dump());
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), path.stem().string());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace attack_alloc
