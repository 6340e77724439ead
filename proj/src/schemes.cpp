#include "microgrid/schemes.hpp"

#include <string>

#include "microgrid/errors.hpp"

namespace microgrid {

std::size_t state_dim(Scheme scheme, int horizon) {
  if (scheme == Scheme::kCommon) return 4;
  if (horizon < 0) throw ContractViolation("horizon must be >= 0");
  return 3 * (static_cast<std::size_t>(horizon) + 1) + 1;
}

FeatureWindow feature_window(Scheme scheme, int horizon, std::size_t t, std::size_t series_length) {
  const std::size_t h = static_cast<std::size_t>(horizon);
  FeatureWindow w{t, t};
  if (scheme == Scheme::kPredictionBased) {
    w.last = t + h;
  } else if (scheme == Scheme::kPredictionFree) {
    if (t < h)
      throw ContractViolation("history window for t=" + std::to_string(t) + " starts before the series");
    w.first = t - h;
  }
  if (w.last >= series_length)
    throw ContractViolation("state window [" + std::to_string(w.first) + ", " +
                            std::to_string(w.last) + "] exceeds series length " +
                            std::to_string(series_length));
  return w;
}

StateRange valid_state_range(Scheme scheme, int horizon, std::size_t series_length) {
  const std::size_t h = scheme == Scheme::kCommon ? 0 : static_cast<std::size_t>(horizon);
  if (series_length < h + 1)
    throw ContractViolation("series of length " + std::to_string(series_length) +
                            " cannot hold a single state window");
  if (scheme == Scheme::kPredictionFree) return {h, series_length - 1};
  return {0, series_length - 1 - h};
}

void build_state_into(const ScenarioSeries& exogenous, std::size_t t, BatteryState soc,
                      Scheme scheme, int horizon, const Scaler& scaler,
                      const MicrogridConfig& cfg, std::vector<double>& out) {
  const FeatureWindow w = feature_window(scheme, horizon, t, exogenous.size());
  const std::size_t n = w.last - w.first + 1;
  out.resize(3 * n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const ExogenousRecord& r = exogenous[w.first + i];
    out[i] = scaler.price.scale_clamped(r.price);
    out[n + i] = scaler.carbon.scale_clamped(r.carbon_intensity);
    out[2 * n + i] = r.unmet_kw / cfg.peak_limit_kw;
  }
  out[3 * n] = soc.soc_kwh / cfg.capacity_kwh;
}

StateVector build_state(const ScenarioSeries& exogenous, std::size_t t, BatteryState soc,
                        Scheme scheme, int horizon, const Scaler& scaler,
                        const MicrogridConfig& cfg) {
  StateVector s{scheme, scheme == Scheme::kCommon ? 0 : horizon, {}};
  build_state_into(exogenous, t, soc, scheme, horizon, scaler, cfg, s.features);
  return s;
}

StepInputs step_inputs(const ScenarioSeries& actual, std::size_t t, const Scaler& scaler) {
  const ExogenousRecord& r = actual[t];
  return StepInputs{scaler.price.scale_clamped(r.price), scaler.carbon.scale_clamped(r.carbon_intensity),
                    r.unmet_kw};
}

}  // namespace microgrid
