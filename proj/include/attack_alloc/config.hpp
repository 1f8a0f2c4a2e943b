#pragma once

// Experiment configuration files.
//
// JSON object with fields
//   name        string, used as case_id in outputs (default: file stem)
//   systems     array of {name?, A, C, Q, R, eps, eps_attacked, weight?, repeat?};
//               matrices are row-major nested arrays, repeat copies the entry
//   budget      integer N
//   trunc       integer truncation level
//   weights     optional array overriding per-system weights (after repeat)
//   policies    optional array of "optimal" | "myopic" | "index" | "random"
//   sim         optional {horizon, burn_in, seeds, clamp}; clamp is a bool
//               (cap simulated holding times at trunc, default true) or an integer
//   tolerances  optional {vi_span, trunc_rel, tail}
//   index       optional {j_cap, oracle_tol}
//   memory_ceiling_gib  optional real, default 8
// Unknown keys are rejected so typos surface as errors.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attack_alloc/model.hpp"

namespace attack_alloc {

struct SimSettings {
  long long horizon = 200000;
  long long burn_in = 1000;
  int seeds = 20;
  int clamp = 0;  // resolved: cap on holding times, negative for none
};

struct Tolerances {
  double vi_span = 1e-6;
  double trunc_rel = 0.01;
  double tail = 1e-12;
};

struct IndexSettings {
  int j_cap = 40;
  double oracle_tol = 1e-7;
};

struct ExperimentConfig {
  std::string name;
  std::vector<SystemModeld> systems;
  int budget = 1;
  int trunc = 19;
  std::vector<std::string> policies;
  SimSettings sim;
  Tolerances tolerances;
  IndexSettings index;
  double memory_ceiling_bytes = 8.0 * 1024 * 1024 * 1024;
  std::string hash;  // FNV-1a 64 of the canonical JSON, hex

  int num_systems() const { return static_cast<int>(systems.size()); }
};

/// Throws ConfigError with a line/column or field path on malformed input.
ExperimentConfig parse_config(const std::string& text, const std::string& default_name = "config");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Directory holding the bundled configs; overridable with ATTACK_ALLOC_CONFIG_DIR.
std::filesystem::path bundled_config_dir();

std::string fnv1a_hex(const std::string& bytes);

}  // namespace attack_alloc
