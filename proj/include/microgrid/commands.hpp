#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "microgrid/agent.hpp"
#include "microgrid/config.hpp"
#include "microgrid/eval.hpp"

namespace microgrid {

// File stem shared by every artifact of one run, e.g. "pf_d3qn_soft_seed7".
std::string run_tag(Scheme scheme, Architecture arch, UpdateRule update, std::uint64_t seed);
std::string eval_tag(Scheme scheme, Architecture arch, UpdateRule update, double noise,
                     std::uint64_t seed);

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path trace_csv;
  std::filesystem::path config_json;
  std::string checkpoint_sha256;
  TrainResult result;
};

// Trains and writes model_<tag>.ckpt, train_<tag>.csv and config_<tag>.json
// into the output directory.
TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& log);

struct EvalArtifacts {
  std::filesystem::path summary_json;
  std::filesystem::path trace_csv;
  EvalReport report;
};

// Evaluates cfg.checkpoint on cfg.data_csv, adding prediction noise for PB.
EvalArtifacts cmd_eval(const RunConfig& cfg, std::ostream& log);

struct SweepRow {
  Scheme scheme = Scheme::kPredictionFree;
  Architecture arch = Architecture::kD3qn;
  UpdateRule update = UpdateRule::kSoft;
  double noise = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double train_final_reward = 0.0;  // mean of the last min(100, episodes) episodes
  double eval_reward = 0.0;
  std::string checkpoint_sha256;
};

struct SweepArtifacts {
  std::filesystem::path table_csv;
  std::vector<SweepRow> rows;
  bool all_ok = true;
};

// Cross product of the configured sweep axes; one isolated train per
// (scheme, arch, update, seed) cell, evaluated at every noise level.
// Worker count comes from MICROGRID_WORKERS (default 1).
SweepArtifacts cmd_sweep(const RunConfig& cfg, std::ostream& log);

struct OracleArtifacts {
  std::filesystem::path report_json;
  std::vector<int> actions;
  double reward = 0.0;
  double idle_reward = 0.0;
  double myopic_reward = 0.0;
};

OracleArtifacts cmd_oracle(const RunConfig& cfg, std::ostream& log);

std::filesystem::path cmd_gendata(int days, std::uint64_t seed, const std::filesystem::path& out);

void write_train_trace(const std::vector<EpisodeRecord>& trace, const std::filesystem::path& path);
void write_eval_trace(const EvalReport& report, const ScenarioSeries& series,
                      const std::filesystem::path& path);

int worker_count_from_env();

}  // namespace microgrid
