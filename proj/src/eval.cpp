#include "microgrid/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <string>

#include "microgrid/errors.hpp"

namespace microgrid {

StepRange full_range(Scheme scheme, int horizon, std::size_t series_length) {
  const StateRange r = valid_state_range(scheme, horizon, series_length);
  return {r.first, r.last + 1};
}

StepRange shared_range(int horizon, std::size_t series_length) {
  const auto h = static_cast<std::size_t>(horizon);
  if (series_length <= 2 * h)
    throw ContractViolation("series of length " + std::to_string(series_length) +
                            " leaves no steps shared by all schemes with horizon " +
                            std::to_string(horizon));
  return {h, series_length - h};
}

EvalReport rollout(const Policy& policy, const ScenarioSeries& actual,
                   const ScenarioSeries* predicted, const RolloutSpec& spec) {
  const StepRange range = spec.range.value_or(full_range(spec.scheme, spec.horizon, actual.size()));
  if (range.end > actual.size() || range.begin > range.end)
    throw ContractViolation("rollout range exceeds the series");
  if (predicted && predicted->size() != actual.size())
    throw ContractViolation("prediction series length differs from actual series");
  const ScenarioSeries& exogenous =
      spec.scheme == Scheme::kPredictionBased && predicted ? *predicted : actual;

  EvalReport report;
  report.trace.reserve(range.end - range.begin);
  BatteryState soc = spec.initial_soc;
  std::vector<double> state;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    build_state_into(exogenous, t, soc, spec.scheme, spec.horizon, spec.scaler, spec.env, state);
    const int action = policy(state, t, soc);
    const StepOutcome out =
        step(soc, Action::from_index(action), step_inputs(actual, t, spec.scaler), spec.env);
    StepRecord rec;
    rec.t = t;
    rec.action = action;
    rec.soc_before = soc.soc_kwh;
    rec.p_b = out.p_b_realized;
    rec.p_g = out.p_g;
    rec.curtailed = out.curtailed;
    rec.soc_after = out.next_soc.soc_kwh;
    rec.reward = out.reward;
    rec.components = out.components;
    rec.clipped = out.clipped;
    rec.peak_violated = out.peak_violated;
    report.trace.push_back(rec);
    report.cumulative_reward += out.reward;
    report.component_totals += out.components;
    if (out.peak_violated) ++report.peak_violation_hours;
    soc = out.next_soc;
  }
  return report;
}

Policy greedy_policy(const NetParams& params) {
  return [&params](std::span<const double> state, std::size_t, BatteryState) {
    return argmax_action(forward(params, state));
  };
}

Policy constant_policy(int action) {
  (void)Action::from_index(action);
  return [action](std::span<const double>, std::size_t, BatteryState) { return action; };
}

Policy uniform_random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [rng](std::span<const double>, std::size_t, BatteryState) {
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    return pick(*rng);
  };
}

Policy myopic_policy(const ScenarioSeries& actual, const Scaler& scaler, const MicrogridConfig& cfg) {
  return [&actual, scaler, cfg](std::span<const double>, std::size_t t, BatteryState soc) {
    const StepInputs in = step_inputs(actual, t, scaler);
    int best = 0;
    double best_reward = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumActions; ++a) {
      const double r = step(soc, Action::from_index(a), in, cfg).reward;
      if (r > best_reward) {
        best_reward = r;
        best = a;
      }
    }
    return best;
  };
}

Policy sequence_policy(std::vector<int> actions, std::size_t first_t) {
  return [actions = std::move(actions), first_t](std::span<const double>, std::size_t t, BatteryState) {
    if (t < first_t || t - first_t >= actions.size())
      throw ContractViolation("action sequence does not cover step " + std::to_string(t));
    return actions[t - first_t];
  };
}

EvalReport rollout(const Checkpoint& model, const ScenarioSeries& actual,
                   const ScenarioSeries* predicted, BatteryState initial_soc,
                   std::optional<StepRange> range, double epsilon, std::uint64_t seed,
                   const MicrogridConfig* measurement) {
  RolloutSpec spec;
  spec.scheme = model.scheme;
  spec.horizon = model.horizon;
  spec.scaler = model.scaler;
  spec.env = measurement ? *measurement : model.env;
  spec.initial_soc = initial_soc;
  spec.range = range;
  if (epsilon <= 0.0) return rollout(greedy_policy(model.params), actual, predicted, spec);
  auto rng = std::make_shared<std::mt19937_64>(seed);
  const NetParams& params = model.params;
  Policy explore = [&params, epsilon, rng](std::span<const double> state, std::size_t, BatteryState) {
    return select_action(params, state, epsilon, *rng);
  };
  return rollout(explore, actual, predicted, spec);
}

ConvergenceStats convergence_stats(std::span<const double> trace, std::size_t begin,
                                   std::size_t end, std::size_t smoothing) {
  if (smoothing == 0) throw ContractViolation("smoothing window must be >= 1");
  if (begin >= end) throw ContractViolation("empty convergence window");
  if (end > trace.size())
    throw ContractViolation("convergence window ends at " + std::to_string(end) +
                            " but the trace has " + std::to_string(trace.size()) + " episodes");
  std::vector<double> smoothed;
  smoothed.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    const std::size_t first = i + 1 >= smoothing ? i + 1 - smoothing : 0;
    double sum = 0.0;
    for (std::size_t j = first; j <= i; ++j) sum += trace[j];
    smoothed.push_back(sum / static_cast<double>(i + 1 - first));
  }
  ConvergenceStats stats;
  for (double v : smoothed) stats.average += v;
  stats.average /= static_cast<double>(smoothed.size());
  for (double v : smoothed) stats.variance += (v - stats.average) * (v - stats.average);
  stats.variance /= static_cast<double>(smoothed.size());
  return stats;
}

namespace {

std::vector<StepInputs> window_inputs(const ScenarioSeries& actual, std::size_t start,
                                      std::size_t length, const Scaler& scaler) {
  if (start + length > actual.size())
    throw ContractViolation("oracle window [" + std::to_string(start) + ", " +
                            std::to_string(start + length) + ") exceeds series length " +
                            std::to_string(actual.size()));
  std::vector<StepInputs> inputs;
  inputs.reserve(length);
  for (std::size_t k = 0; k < length; ++k) inputs.push_back(step_inputs(actual, start + k, scaler));
  return inputs;
}

struct Enumerator {
  const std::vector<StepInputs>& inputs;
  const MicrogridConfig& cfg;
  double gamma;
  std::vector<int> current;
  OracleResult best{{}, -std::numeric_limits<double>::infinity()};

  void visit(std::size_t depth, BatteryState soc, double total, double discount) {
    if (depth == inputs.size()) {
      if (total > best.reward) {
        best.reward = total;
        best.actions = current;
      }
      return;
    }
    for (int a = 0; a < kNumActions; ++a) {
      const StepOutcome out = step(soc, Action::from_index(a), inputs[depth], cfg);
      current[depth] = a;
      visit(depth + 1, out.next_soc, total + discount * out.reward, discount * gamma);
    }
  }
};

std::size_t nearest_index(const std::vector<double>& grid, double soc) {
  const auto it = std::lower_bound(grid.begin(), grid.end(), soc);
  if (it == grid.begin()) return 0;
  if (it == grid.end()) return grid.size() - 1;
  const auto hi = static_cast<std::size_t>(it - grid.begin());
  return (soc - grid[hi - 1]) <= (grid[hi] - soc) ? hi - 1 : hi;
}

}  // namespace

OracleResult exhaustive_oracle(const ScenarioSeries& actual, std::size_t start, int horizon,
                               const Scaler& scaler, const MicrogridConfig& cfg,
                               BatteryState initial_soc, double gamma) {
  if (horizon < 1) throw ContractViolation("oracle horizon must be >= 1");
  if (horizon > kMaxExhaustiveHorizon)
    throw ContractViolation("exhaustive oracle horizon " + std::to_string(horizon) +
                            " exceeds the enumeration cap of " + std::to_string(kMaxExhaustiveHorizon));
  const auto inputs = window_inputs(actual, start, static_cast<std::size_t>(horizon), scaler);
  Enumerator e{inputs, cfg, gamma, std::vector<int>(inputs.size(), 0)};
  e.visit(0, initial_soc, 0.0, 1.0);
  return e.best;
}

std::vector<double> reachable_socs(const MicrogridConfig& cfg, BatteryState initial_soc, int horizon) {
  std::set<double> all{initial_soc.soc_kwh};
  std::set<double> frontier{initial_soc.soc_kwh};
  // SOC transitions do not depend on exogenous inputs.
  const StepInputs neutral{};
  for (int d = 0; d < horizon; ++d) {
    std::set<double> next;
    for (double soc : frontier) {
      for (int a = 0; a < kNumActions; ++a)
        next.insert(step(BatteryState{soc}, Action::from_index(a), neutral, cfg).next_soc.soc_kwh);
    }
    all.insert(next.begin(), next.end());
    frontier = std::move(next);
  }
  return {all.begin(), all.end()};
}

DpResult dp_oracle(const ScenarioSeries& actual, std::size_t start, std::size_t length,
                   const Scaler& scaler, const MicrogridConfig& cfg, BatteryState initial_soc,
                   std::vector<double> soc_grid, double gamma) {
  if (soc_grid.size() < 2) throw ContractViolation("dp oracle needs at least 2 SOC bins");
  if (length == 0) throw ContractViolation("dp oracle needs at least one step");
  std::sort(soc_grid.begin(), soc_grid.end());
  const auto inputs = window_inputs(actual, start, length, scaler);
  const std::size_t n = soc_grid.size();

  // values[k][i]: best return from step k onward at grid SOC i.
  std::vector<std::vector<double>> values(length + 1, std::vector<double>(n, 0.0));
  for (std::size_t k = length; k-- > 0;) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < kNumActions; ++a) {
        const StepOutcome out = step(BatteryState{soc_grid[i]}, Action::from_index(a), inputs[k], cfg);
        const double v = out.reward + gamma * values[k + 1][nearest_index(soc_grid, out.next_soc.soc_kwh)];
        best = std::max(best, v);
      }
      values[k][i] = best;
    }
  }

  DpResult result;
  result.value_at_start = values[0];
  BatteryState soc = initial_soc;
  double discount = 1.0;
  for (std::size_t k = 0; k < length; ++k) {
    int best_action = 0;
    double best = -std::numeric_limits<double>::infinity();
    StepOutcome best_out;
    for (int a = 0; a < kNumActions; ++a) {
      const StepOutcome out = step(soc, Action::from_index(a), inputs[k], cfg);
      const double v = out.reward + gamma * values[k + 1][nearest_index(soc_grid, out.next_soc.soc_kwh)];
      if (v > best) {
        best = v;
        best_action = a;
        best_out = out;
      }
    }
    result.actions.push_back(best_action);
    result.dispatch_reward += discount * best_out.reward;
    discount *= gamma;
    soc = best_out.next_soc;
  }
  result.soc_grid = std::move(soc_grid);
  return result;
}

DpResult dp_oracle(const ScenarioSeries& actual, std::size_t start, std::size_t length,
                   const Scaler& scaler, const MicrogridConfig& cfg, BatteryState initial_soc,
                   int soc_bins, double gamma) {
  if (soc_bins < 2) throw ContractViolation("dp oracle needs at least 2 SOC bins");
  std::vector<double> grid(static_cast<std::size_t>(soc_bins));
  const double span = cfg.soc_max_kwh - cfg.soc_min_kwh;
  for (int i = 0; i < soc_bins; ++i)
    grid[static_cast<std::size_t>(i)] = cfg.soc_min_kwh + span * i / (soc_bins - 1);
  grid.back() = cfg.soc_max_kwh;
  return dp_oracle(actual, start, length, scaler, cfg, initial_soc, std::move(grid), gamma);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<NoiseSweepRow> noise_sweep(const Checkpoint& pb_model, const Checkpoint& pf_model,
                                       const ScenarioSeries& actual, std::span<const double> levels,
                                       std::span<const std::uint64_t> seeds,
                                       BatteryState initial_soc, std::optional<StepRange> range) {
  if (pb_model.scheme != Scheme::kPredictionBased)
    throw ContractViolation("noise sweep expects a PB checkpoint in the first slot");
  if (pf_model.scheme != Scheme::kPredictionFree)
    throw ContractViolation("noise sweep expects a PF checkpoint in the second slot");
  if (seeds.empty()) throw ContractViolation("noise sweep needs at least one seed");
  const double pf_reward = rollout(pf_model, actual, nullptr, initial_soc, range).cumulative_reward;
  std::vector<NoiseSweepRow> rows;
  for (double level : levels) {
    NoiseSweepRow row;
    row.level = level;
    row.pf_reward = pf_reward;
    for (std::uint64_t seed : seeds) {
      const ScenarioSeries predicted = simulate_predictions(actual, NoiseSpec{level, seed});
      row.pb_rewards.push_back(rollout(pb_model, actual, &predicted, initial_soc, range).cumulative_reward);
    }
    row.pb_median = median(row.pb_rewards);
    rows.push_back(std::move(row));
  }
  return rows;
}

AblationResult objective_ablation(const ScenarioSeries& series, Scheme scheme,
                                  const MicrogridConfig& env_cfg, const AgentConfig& agent_cfg,
                                  int episodes, std::uint64_t seed, Objective which,
                                  BatteryState initial_soc) {
  MicrogridConfig ablated_cfg = env_cfg;
  switch (which) {
    case Objective::kCarbon: ablated_cfg.alpha = 0.0; break;
    case Objective::kPeak: ablated_cfg.beta = 0.0; break;
    case Objective::kDegradation: ablated_cfg.lambda = 0.0; break;
  }
  const auto to_checkpoint = [&](const TrainResult& r, const MicrogridConfig& cfg) {
    return Checkpoint{r.online, scheme, agent_cfg.horizon, agent_cfg.double_q, agent_cfg.update, r.scaler, cfg};
  };
  AblationResult result;
  result.full_model = to_checkpoint(train(series, scheme, env_cfg, agent_cfg, episodes, seed), env_cfg);
  result.ablated_model =
      to_checkpoint(train(series, scheme, ablated_cfg, agent_cfg, episodes, seed), ablated_cfg);
  result.full = rollout(result.full_model, series, nullptr, initial_soc, std::nullopt, 0.0, 0, &env_cfg);
  result.ablated =
      rollout(result.ablated_model, series, nullptr, initial_soc, std::nullopt, 0.0, 0, &env_cfg);
  return result;
}

}  // namespace microgrid
