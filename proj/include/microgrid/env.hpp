#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace microgrid {

// Physical battery/grid constants and reward weights. Defaults are the
// reference microgrid: 1 MWh battery kept within 10%..90% SOC, 300 kWh per
// hour transfer limit and a 4450 kW import peak.
struct MicrogridConfig {
  double capacity_kwh = 1000.0;
  double soc_max_kwh = 900.0;
  double soc_min_kwh = 100.0;
  double transfer_cap_kwh = 300.0;
  double efficiency = 0.95;
  double peak_limit_kw = 4450.0;
  double dt_h = 1.0;
  double standby_loss_kw = 0.0;

  double alpha = 0.25;   // carbon weight
  double beta = 1.5;     // peak-load weight
  double lambda = 0.02;  // degradation weight

  // Physical invariants: SOC bounds ordering, efficiency in (0,1), etc.
  // Throws ConfigError.
  void validate() const;

  // Reward weight ordering beta > 1 > alpha >> lambda >= 0, checked as
  // beta > 1, alpha < 1, lambda <= alpha / 10. Throws ConfigError.
  void validate_reward_weights() const;
};

inline constexpr int kNumActions = 5;
inline constexpr std::array<double, kNumActions> kActionLevels = {-1.0, -0.5, 0.0, 0.5, 1.0};

// One of the five discrete battery commands. Positive levels discharge.
class Action {
 public:
  constexpr Action() = default;

  static Action from_index(int index);
  static Action from_level(double level);

  constexpr int index() const { return index_; }
  constexpr double level() const { return kActionLevels[static_cast<std::size_t>(index_)]; }

  friend constexpr bool operator==(Action, Action) = default;

 private:
  constexpr explicit Action(int index) : index_(index) {}
  int index_ = 2;  // idle
};

struct BatteryState {
  double soc_kwh = 0.0;
};

struct RewardComponents {
  double market = 0.0;
  double carbon = 0.0;
  double peak_penalty = 0.0;  // <= 0
  double degradation = 0.0;   // >= 0, subtracted

  double total() const { return market + carbon + peak_penalty - degradation; }

  RewardComponents& operator+=(const RewardComponents& other) {
    market += other.market;
    carbon += other.carbon;
    peak_penalty += other.peak_penalty;
    degradation += other.degradation;
    return *this;
  }
};

// Exogenous values the environment needs for one step. Price and carbon
// intensity are already min-max scaled into [0, 1].
struct StepInputs {
  double price_scaled = 0.0;
  double carbon_scaled = 0.0;
  double unmet_kw = 0.0;
};

struct GridFlow {
  double import_kw = 0.0;
  double curtailed_kw = 0.0;
};

struct StepOutcome {
  double p_b_realized = 0.0;
  double p_g = 0.0;
  double curtailed = 0.0;
  double reward = 0.0;
  RewardComponents components;
  BatteryState next_soc;
  bool clipped = false;
  bool peak_violated = false;
};

// Commanded power a * E_max / dt, clipped into the feasible charge/discharge
// interval for the current SOC.
double action_to_power(Action action, BatteryState soc, const MicrogridConfig& cfg);

// SOC transition for an already-feasible battery power. Throws
// ContractViolation if p_b exceeds the feasibility bounds by more than 1e-9.
BatteryState battery_step(BatteryState soc, double p_b, const MicrogridConfig& cfg);

// Power balance with export disallowed: surplus is curtailed.
GridFlow grid_power(double p_u, double p_b);

RewardComponents reward(double price_scaled, double carbon_scaled, double p_b, double p_u,
                        const MicrogridConfig& cfg);

StepOutcome step(BatteryState soc, Action action, const StepInputs& inputs,
                 const MicrogridConfig& cfg);

// Uniform initial SOC in [soc_min, soc_max].
BatteryState reset(const MicrogridConfig& cfg, std::mt19937_64& rng);
BatteryState reset(const MicrogridConfig& cfg, std::uint64_t seed);

// Stateful wrapper holding the current SOC.
class MicrogridEnv {
 public:
  explicit MicrogridEnv(MicrogridConfig cfg) : cfg_(cfg) {}

  BatteryState reset(std::mt19937_64& rng) { return soc_ = microgrid::reset(cfg_, rng); }
  void set_soc(BatteryState soc) { soc_ = soc; }

  StepOutcome step(Action action, const StepInputs& inputs) {
    StepOutcome out = microgrid::step(soc_, action, inputs, cfg_);
    soc_ = out.next_soc;
    return out;
  }

  BatteryState soc() const { return soc_; }
  const MicrogridConfig& config() const { return cfg_; }

 private:
  MicrogridConfig cfg_;
  BatteryState soc_{};
};

}  // namespace microgrid
