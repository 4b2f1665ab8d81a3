#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "avp/pipeline.hpp"
#include "avp/sweep.hpp"
#include "avp/synthetic.hpp"
#include "avp/train.hpp"

namespace avp {

// Per-pipeline detector adaptation used by sweeps and runs.
struct AdaptationConfig {
  bool enabled = true;
  int sequences = 8;
  int steps = 1000;
  int batch = 16;
  double lr = 10.0;
};

// Everything the command-line tool can be told. Seeds for the evaluation
// sequences, the model and the adaptation pool are derived from `seed`.
struct AppConfig {
  std::uint64_t seed = 1;
  GeneratorSpec generator = deteriorated_benchmark_spec();
  int sequences = 5;
  PipelineConfig pipeline = presets::adaptive();
  FlowKind flow = FlowKind::kGroundTruth;
  SweepAxes axes;
  ModelRecipe model;
  AdaptationConfig adaptation;
  int workers = 1;

  void validate() const;

  std::uint64_t sequence_seed() const { return derive_seed(seed, 10); }
  std::uint64_t model_seed() const { return derive_seed(seed, 11); }
  std::uint64_t adaptation_seed() const { return derive_seed(seed, 12); }
};

nlohmann::json to_json(const AppConfig& config);
// Keys missing from `j` keep their defaults; unknown keys are rejected.
AppConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig base = {});

// Sets a dotted key ("pipeline.scheduler.gamma") to `value`, which is parsed
// as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, std::string_view dotted_key, std::string_view value);

// Defaults, then the config file (if any), then overrides in order, then the
// AVP_SEED environment variable.
AppConfig load_config(const std::optional<std::string>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

// Preset names: per_frame, dff, fgfa, c1, c2, c3, oracle.
PipelineConfig preset_by_name(std::string_view name, int interval, double gamma, int radius,
                              double lambda);

std::string_view to_string(FlowKind kind);
FlowKind flow_kind_from_string(std::string_view name);

}  // namespace avp
