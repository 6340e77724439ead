#pragma once

#include <cstddef>
#include <vector>

#include "microgrid/data.hpp"
#include "microgrid/env.hpp"

namespace microgrid {

// Network input for one decision. Layout: every price feature, then every
// carbon feature, then every unmet-power feature, then SOC.
struct StateVector {
  Scheme scheme = Scheme::kCommon;
  int horizon = 0;
  std::vector<double> features;
};

// 3(T+1)+1 for PB and PF, 4 for the common scheme.
std::size_t state_dim(Scheme scheme, int horizon);

// Indices [first, last] of the exogenous window feeding a state at time t.
struct FeatureWindow {
  std::size_t first = 0;
  std::size_t last = 0;
};
FeatureWindow feature_window(Scheme scheme, int horizon, std::size_t t, std::size_t series_length);

// Times t for which build_state has a full window in a series of this length.
struct StateRange {
  std::size_t first = 0;
  std::size_t last = 0;  // inclusive
};
StateRange valid_state_range(Scheme scheme, int horizon, std::size_t series_length);

// PR/CI are min-max scaled then clamped to [0,1]; unmet power is divided by
// the peak limit and SOC by battery capacity. `exogenous` is the prediction
// series for PB and the actual series otherwise. Throws ContractViolation
// when the window leaves the series.
StateVector build_state(const ScenarioSeries& exogenous, std::size_t t, BatteryState soc,
                        Scheme scheme, int horizon, const Scaler& scaler,
                        const MicrogridConfig& cfg);

// Same as build_state but writes into `out` (resized to state_dim).
void build_state_into(const ScenarioSeries& exogenous, std::size_t t, BatteryState soc,
                      Scheme scheme, int horizon, const Scaler& scaler,
                      const MicrogridConfig& cfg, std::vector<double>& out);

// Scaled exogenous inputs the reward sees at time t.
StepInputs step_inputs(const ScenarioSeries& actual, std::size_t t, const Scaler& scaler);

}  // namespace microgrid
