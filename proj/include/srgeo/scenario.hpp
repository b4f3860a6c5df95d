#pragma once

#include <nlohmann/json.hpp>

#include "srgeo/manifold.hpp"

namespace srgeo {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

struct ScenarioConfig {
  std::string manifold;  // builtin name or spec path
  std::string task;      // flag | nilpotent | distance | ball | blowup | isometry |
                         // factor | density | area-check | diameter
  Json params;           // task parameters (already defaulted by the CLI)
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool write_json = true;
  bool write_csv = false;
};

struct ScenarioOutcome {
  int exit_code = 1;  // 0 pass, 1 error, 2 verdict-fail
  Json report;
  std::string json_path;
  std::string csv_path;
};

// Executes the task, builds the report, writes the artifacts.
ScenarioOutcome run_scenario(const ScenarioConfig& cfg);

// Serializes the report deterministically (byte-identical for identical
// spec, seed and params).
std::string report_to_string(const Json& report);

}  // namespace srgeo
