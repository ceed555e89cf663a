#pragma once

// Run configuration: one JSON document with a global seed, an output
// directory and synth / train / eval sections. Every field has a default;
// unknown keys are rejected. Section seeds left null inherit the global seed
// (the eval set uses seed + 1000 so it never shares scenes with training).

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "moddpo/corrupt.hpp"
#include "moddpo/synth.hpp"
#include "moddpo/train.hpp"

namespace moddpo {

inline constexpr const char* kConfigEnvVar = "MODDPO_CONFIG";

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "runs/default";
  SynthConfig synth;
  TrainConfig train;
  WarmupConfig warmup;
  std::string model_name;  // checkpoint stem; defaults to the loss variant
  EvalSetConfig eval_set;
  CorruptionSpec shift;  // corruption for the log-likelihood-shift analysis
  std::vector<std::string> eval_models;  // empty: every checkpoint in out_dir

  void validate() const;
};

nlohmann::ordered_json default_config_json();

// Applies "dotted.key=value". The value is parsed as JSON when possible and
// taken as a string otherwise. Throws ConfigError for malformed input or an
// unknown key.
void apply_override(nlohmann::ordered_json& config, std::string_view assignment);

RunConfig parse_run_config(const nlohmann::ordered_json& config);
nlohmann::ordered_json to_json(const RunConfig& config);

// Defaults, then the file (if any), then overrides in order.
nlohmann::ordered_json resolve_config_json(const std::optional<std::filesystem::path>& path,
                                           const std::vector<std::string>& overrides);
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides);

}  // namespace moddpo
