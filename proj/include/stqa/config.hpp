#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "stqa/metrics.hpp"
#include "stqa/qagen.hpp"

namespace stqa {

struct Paths {
  std::filesystem::path annotations;  // JSONL event tuples
  std::filesystem::path vocabulary;   // empty: built-in table
  std::filesystem::path templates;    // empty: built-in registry
  std::filesystem::path output = "out";
};

// Toolchain configuration. Every field has a default; from_json rejects
// unknown keys and out-of-range values.
struct Config {
  Paths paths;
  double fps = 1.0;                    // target fps after densification
  double broadcast_half_window_s = 0.5;
  double clip_min_s = 20.0;
  double clip_max_s = 30.0;
  double max_rejected_rate = 0.0;      // ingest fails above this fraction
  GenerationConfig generation;         // seed, quotas, δ, gate, thresholds
  MetricWeights weights;

  // Relative paths in the file are resolved against `base_dir`.
  static Config from_json(const nlohmann::json& doc,
                          const std::filesystem::path& base_dir = {});
  static Config load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

// From STQA_LOG (error|warn|info|debug); info when unset or unknown.
LogLevel log_level_from_env();

// Writes "[level] message" to stderr when `level` is enabled.
void log(LogLevel level, const std::string& message);

}  // namespace stqa
