#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "microgrid/agent.hpp"
#include "microgrid/data.hpp"
#include "microgrid/env.hpp"

namespace microgrid {

enum class EvalRangeKind { kShared, kFull };

// Everything a command needs. Serialises to a flat JSON object with dotted
// keys ("env.alpha", "agent.batch", ...); see README for the key list.
struct RunConfig {
  std::filesystem::path data_csv;
  std::filesystem::path output_dir = "out";
  std::filesystem::path checkpoint;

  MicrogridConfig env;
  AgentConfig agent;
  Scheme scheme = Scheme::kPredictionFree;
  bool scheme_explicit = false;  // set when the config or a flag named a scheme
  int episodes = 2000;
  std::uint64_t seed = 0;
  double noise = 0.0;

  double eval_initial_soc_kwh = 500.0;
  EvalRangeKind eval_range = EvalRangeKind::kShared;
  double eval_epsilon = 0.0;

  std::optional<std::vector<Scheme>> sweep_schemes;
  std::optional<std::vector<Architecture>> sweep_archs;
  std::optional<std::vector<UpdateRule>> sweep_updates;
  std::optional<std::vector<double>> sweep_noise_levels;
  std::optional<std::vector<std::uint64_t>> sweep_seeds;

  std::string oracle_mode = "exhaustive";  // or "dp"
  std::size_t oracle_start = 0;
  int oracle_horizon = 4;
  std::size_t oracle_length = 0;  // dp only; 0 = to the end of the series
  int oracle_soc_bins = 201;
  double oracle_initial_soc_kwh = 500.0;
  double oracle_gamma = 1.0;
};

// Parses a flat dotted-key object. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& flat);
RunConfig load_run_config(const std::filesystem::path& path);

// Applies one `key=value` override using the same key names as the file.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// The fully resolved configuration; loading it reproduces `cfg` exactly.
nlohmann::json to_json(const RunConfig& cfg);

// Field-level validation, including the reward-weight ordering. When
// `need_data` is set the data file must exist; likewise `need_checkpoint`.
void validate(const RunConfig& cfg, bool need_data, bool need_checkpoint);

}  // namespace microgrid
