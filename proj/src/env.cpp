#include "microgrid/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "microgrid/errors.hpp"

namespace microgrid {

namespace {

constexpr double kFeasibilityTolerance = 1e-9;

std::string describe(double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

}  // namespace

void MicrogridConfig::validate() const {
  if (!(capacity_kwh > 0.0)) throw ConfigError("env.capacity_kwh", "must be positive");
  if (!(soc_min_kwh > 0.0)) throw ConfigError("env.soc_min_kwh", "must be positive");
  if (!(soc_min_kwh < soc_max_kwh))
    throw ConfigError("env.soc_max_kwh", "must exceed env.soc_min_kwh");
  if (!(soc_max_kwh <= capacity_kwh))
    throw ConfigError("env.soc_max_kwh", "must not exceed env.capacity_kwh");
  if (!(efficiency > 0.0 && efficiency < 1.0))
    throw ConfigError("env.efficiency", "must lie in (0, 1)");
  if (!(transfer_cap_kwh >= 0.0)) throw ConfigError("env.transfer_cap_kwh", "must be >= 0");
  if (!(peak_limit_kw > 0.0)) throw ConfigError("env.peak_limit_kw", "must be positive");
  if (!(dt_h > 0.0)) throw ConfigError("env.dt_h", "must be positive");
  if (!(standby_loss_kw >= 0.0)) throw ConfigError("env.standby_loss_kw", "must be >= 0");
  if (!(alpha >= 0.0)) throw ConfigError("env.alpha", "must be >= 0");
  if (!(beta >= 0.0)) throw ConfigError("env.beta", "must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("env.lambda", "must be >= 0");
}

void MicrogridConfig::validate_reward_weights() const {
  const std::string ordering = "reward weights must satisfy beta > 1 > alpha >> lambda >= 0";
  if (!(beta > 1.0)) throw ConfigError("env.beta", ordering + " (beta > 1 violated)");
  if (!(alpha < 1.0)) throw ConfigError("env.alpha", ordering + " (alpha < 1 violated)");
  if (!(lambda >= 0.0)) throw ConfigError("env.lambda", ordering + " (lambda >= 0 violated)");
  if (!(lambda <= alpha / 10.0))
    throw ConfigError("env.lambda", ordering + " (lambda <= alpha / 10 violated)");
}

Action Action::from_index(int index) {
  if (index < 0 || index >= kNumActions)
    throw ContractViolation("action index out of range: " + std::to_string(index));
  return Action(index);
}

Action Action::from_level(double level) {
  for (int i = 0; i < kNumActions; ++i) {
    if (kActionLevels[static_cast<std::size_t>(i)] == level) return Action(i);
  }
  throw ContractViolation("not an action level: " + describe(level));
}

double action_to_power(Action action, BatteryState soc, const MicrogridConfig& cfg) {
  const double commanded = action.level() * cfg.transfer_cap_kwh / cfg.dt_h;
  const double max_discharge = (soc.soc_kwh - cfg.soc_min_kwh) * cfg.efficiency / cfg.dt_h;
  const double max_charge = (soc.soc_kwh - cfg.soc_max_kwh) / cfg.efficiency / cfg.dt_h;
  if (commanded > 0.0) return std::max(0.0, std::min(commanded, max_discharge));
  if (commanded < 0.0) return std::min(0.0, std::max(commanded, max_charge));
  return 0.0;
}

BatteryState battery_step(BatteryState soc, double p_b, const MicrogridConfig& cfg) {
  const double e = soc.soc_kwh;
  const double energy = p_b * cfg.dt_h;
  double next = e;
  if (p_b > 0.0) {
    const double bound = (e - cfg.soc_min_kwh) * cfg.efficiency;
    if (energy > bound + kFeasibilityTolerance)
      throw ContractViolation("discharge " + describe(p_b) + " kW exceeds feasible bound at SOC " +
                              describe(e));
    next = e - energy / cfg.efficiency;
  } else if (p_b < 0.0) {
    const double bound = (e - cfg.soc_max_kwh) / cfg.efficiency;
    if (energy < bound - kFeasibilityTolerance)
      throw ContractViolation("charge " + describe(p_b) + " kW exceeds feasible bound at SOC " +
                              describe(e));
    next = e - energy * cfg.efficiency;
  } else {
    next = std::max(cfg.soc_min_kwh, e - cfg.dt_h * cfg.standby_loss_kw);
  }
  // Absorb rounding at the bounds.
  return BatteryState{std::clamp(next, cfg.soc_min_kwh, cfg.soc_max_kwh)};
}

GridFlow grid_power(double p_u, double p_b) {
  const double balance = p_u - p_b;
  return GridFlow{std::max(0.0, balance), std::max(0.0, -balance)};
}

RewardComponents reward(double price_scaled, double carbon_scaled, double p_b, double p_u,
                        const MicrogridConfig& cfg) {
  RewardComponents r;
  r.market = price_scaled * p_b * cfg.dt_h;
  r.carbon = cfg.alpha * carbon_scaled * p_b * cfg.dt_h;
  r.peak_penalty = cfg.beta * std::min(0.0, p_b + cfg.peak_limit_kw - p_u) * cfg.dt_h;
  r.degradation = cfg.lambda * std::abs(p_b) * cfg.dt_h;
  return r;
}

StepOutcome step(BatteryState soc, Action action, const StepInputs& inputs,
                 const MicrogridConfig& cfg) {
  StepOutcome out;
  const double commanded = action.level() * cfg.transfer_cap_kwh / cfg.dt_h;
  out.p_b_realized = action_to_power(action, soc, cfg);
  out.clipped = out.p_b_realized != commanded;
  out.components =
      reward(inputs.price_scaled, inputs.carbon_scaled, out.p_b_realized, inputs.unmet_kw, cfg);
  out.reward = out.components.total();
  out.next_soc = battery_step(soc, out.p_b_realized, cfg);
  const GridFlow flow = grid_power(inputs.unmet_kw, out.p_b_realized);
  out.p_g = flow.import_kw;
  out.curtailed = flow.curtailed_kw;
  out.peak_violated = out.p_g > cfg.peak_limit_kw;
  return out;
}

BatteryState reset(const MicrogridConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> soc(cfg.soc_min_kwh, cfg.soc_max_kwh);
  return BatteryState{soc(rng)};
}

BatteryState reset(const MicrogridConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return reset(cfg, rng);
}

}  // namespace microgrid
