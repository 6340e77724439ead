#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "microgrid/agent.hpp"
#include "microgrid/checkpoint.hpp"
#include "microgrid/data.hpp"
#include "microgrid/env.hpp"
#include "microgrid/schemes.hpp"

namespace microgrid {

struct StepRecord {
  std::size_t t = 0;
  int action = 0;
  double soc_before = 0.0;
  double p_b = 0.0;
  double p_g = 0.0;
  double curtailed = 0.0;
  double soc_after = 0.0;
  double reward = 0.0;
  RewardComponents components;
  bool clipped = false;
  bool peak_violated = false;
};

struct EvalReport {
  double cumulative_reward = 0.0;
  RewardComponents component_totals;
  std::vector<StepRecord> trace;
  int peak_violation_hours = 0;
};

// Decision rule: sees the state vector, the time index and the true SOC.
using Policy = std::function<int(std::span<const double> state, std::size_t t, BatteryState soc)>;

// Half-open time range [begin, end) of decision steps.
struct StepRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// The widest range over which `scheme` has full windows.
StepRange full_range(Scheme scheme, int horizon, std::size_t series_length);
// Steps every scheme can evaluate: [T, N - T).
StepRange shared_range(int horizon, std::size_t series_length);

struct RolloutSpec {
  Scheme scheme = Scheme::kCommon;
  int horizon = 0;
  Scaler scaler;
  MicrogridConfig env;       // measurement weights
  BatteryState initial_soc{500.0};
  std::optional<StepRange> range;  // default: full_range of the scheme
};

// Runs `policy` over `actual`. States are built from `predicted` for PB when
// given, otherwise from `actual`; rewards always use actual values.
EvalReport rollout(const Policy& policy, const ScenarioSeries& actual,
                   const ScenarioSeries* predicted, const RolloutSpec& spec);

// Greedy rollout of a checkpointed network. `epsilon` > 0 enables the
// exploratory application mode with draws from `rng`.
EvalReport rollout(const Checkpoint& model, const ScenarioSeries& actual,
                   const ScenarioSeries* predicted, BatteryState initial_soc,
                   std::optional<StepRange> range = std::nullopt, double epsilon = 0.0,
                   std::uint64_t seed = 0, const MicrogridConfig* measurement = nullptr);

Policy greedy_policy(const NetParams& params);
Policy constant_policy(int action);
Policy uniform_random_policy(std::uint64_t seed);
// Picks the action with the largest immediate reward.
Policy myopic_policy(const ScenarioSeries& actual, const Scaler& scaler, const MicrogridConfig& cfg);
// Replays a fixed action sequence starting at `first_t`.
Policy sequence_policy(std::vector<int> actions, std::size_t first_t);

struct ConvergenceStats {
  double average = 0.0;
  double variance = 0.0;
};

// Trailing moving average of `smoothing` episodes (shorter at the start),
// then mean and population variance over [begin, end).
ConvergenceStats convergence_stats(std::span<const double> trace, std::size_t begin,
                                   std::size_t end, std::size_t smoothing = 50);

struct OracleResult {
  std::vector<int> actions;
  double reward = 0.0;  // discounted by gamma when gamma < 1
};

inline constexpr int kMaxExhaustiveHorizon = 8;

// Brute force over all 5^H command sequences on [start, start + H). Ties go
// to the lexicographically smallest index sequence.
OracleResult exhaustive_oracle(const ScenarioSeries& actual, std::size_t start, int horizon,
                               const Scaler& scaler, const MicrogridConfig& cfg,
                               BatteryState initial_soc, double gamma = 1.0);

struct DpResult {
  std::vector<double> soc_grid;
  std::vector<double> value_at_start;  // optimal value per grid SOC at step 0
  std::vector<int> actions;            // extracted dispatch from initial SOC
  double dispatch_reward = 0.0;        // dispatch replayed in the exact env
};

// Backward induction on a sorted SOC grid, next SOC snapped to the nearest
// grid point. Decisions along the extracted path use the exact SOC.
DpResult dp_oracle(const ScenarioSeries& actual, std::size_t start, std::size_t length,
                   const Scaler& scaler, const MicrogridConfig& cfg, BatteryState initial_soc,
                   std::vector<double> soc_grid, double gamma = 1.0);
DpResult dp_oracle(const ScenarioSeries& actual, std::size_t start, std::size_t length,
                   const Scaler& scaler, const MicrogridConfig& cfg, BatteryState initial_soc,
                   int soc_bins = 201, double gamma = 1.0);

// Every SOC value the exact environment can reach from `initial_soc` within
// `horizon` steps, sorted and deduplicated.
std::vector<double> reachable_socs(const MicrogridConfig& cfg, BatteryState initial_soc, int horizon);

struct NoiseSweepRow {
  double level = 0.0;
  std::vector<double> pb_rewards;  // one per noise seed
  double pb_median = 0.0;
  double pf_reward = 0.0;
};

std::vector<NoiseSweepRow> noise_sweep(const Checkpoint& pb_model, const Checkpoint& pf_model,
                                       const ScenarioSeries& actual, std::span<const double> levels,
                                       std::span<const std::uint64_t> seeds,
                                       BatteryState initial_soc, std::optional<StepRange> range);

enum class Objective { kCarbon, kPeak, kDegradation };

struct AblationResult {
  EvalReport full;
  EvalReport ablated;
  Checkpoint full_model;
  Checkpoint ablated_model;
};

// Trains with the named weight zeroed; both policies are measured with the
// nominal weights of `env_cfg`.
AblationResult objective_ablation(const ScenarioSeries& series, Scheme scheme,
                                  const MicrogridConfig& env_cfg, const AgentConfig& agent_cfg,
                                  int episodes, std::uint64_t seed, Objective which,
                                  BatteryState initial_soc);

double median(std::vector<double> values);

}  // namespace microgrid
