#pragma once

// JSON configuration and result serialisation. Unknown keys are rejected so
// that typos in experiment files fail loudly instead of silently using defaults.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bcbf/scenarios.hpp"

namespace bcbf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TraceLevel { kNone, kSummary, kFull };

TraceLevel parse_trace_level(const std::string& s);

struct RunOptions {
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "out";
  TraceLevel trace = TraceLevel::kSummary;
  std::size_t n_runs = 100;
  std::vector<RiskSpec> methods = benchmark_methods();
  double shift_ell = 0.09;
  double shift_velocity_scale = 1.2;
};

struct Config {
  ScenarioConfig scenario;
  RunOptions run;
};

/// Throws ConfigError on schema violations (unknown keys, wrong types, invalid values).
Config parse_config(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);

RiskSpec parse_risk_spec(const nlohmann::json& j);

nlohmann::json to_json(const RiskSpec& r);
nlohmann::json to_json(const ScenarioConfig& c);
nlohmann::json to_json(const BoundResult& r, bool include_weights);
nlohmann::json to_json(const RunOutcome& o, bool include_timing = true);
nlohmann::json to_json(const BenchmarkSummary& s, bool include_timing = true);

/// CSV table with one row per method: method,N,success,collision,timeout,t_avg_ms.
std::string summary_csv(const BenchmarkSummary& s, bool include_timing = true);

}  // namespace bcbf
