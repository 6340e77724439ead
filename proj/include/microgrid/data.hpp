#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace microgrid {

// One hour of exogenous data. `unmet_kw` is always demand minus RES and may
// be negative when renewables exceed demand.
struct ExogenousRecord {
  std::int64_t epoch_hour = 0;  // hours since 1970-01-01T00:00Z
  double price = 0.0;           // $/kWh
  double carbon_intensity = 0.0;  // gCO2/kWh
  double demand_kw = 0.0;
  double res_kw = 0.0;
  double unmet_kw = 0.0;
};

ExogenousRecord make_record(std::int64_t epoch_hour, double price, double carbon_intensity,
                            double demand_kw, double res_kw);

// Min-max statistics for a single variable.
struct MinMax {
  double min = 0.0;
  double max = 1.0;

  double scale(double x) const { return (x - min) / (max - min); }
  double unscale(double y) const { return min + y * (max - min); }
  double scale_clamped(double x) const;
};

struct Scaler {
  MinMax price;
  MinMax carbon;
};

// Hourly scenario. Immutable once built; copies are cheap enough to share
// between runs.
struct ScenarioSeries {
  std::vector<ExogenousRecord> records;
  double dt_h = 1.0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const ExogenousRecord& operator[](std::size_t i) const { return records[i]; }
};

// Parses `timestamp,price,carbon_intensity,demand_kw,res_kw` CSV. Rows are
// sorted by timestamp and must then form a gap-free hourly sequence. Throws
// DataError naming the offending row (1-based, header is row 1).
ScenarioSeries load_csv(const std::filesystem::path& path);
ScenarioSeries parse_csv(std::istream& in);

void write_csv(const ScenarioSeries& series, const std::filesystem::path& path);
void write_csv(const ScenarioSeries& series, std::ostream& out);

// ISO-8601 `YYYY-MM-DDTHH:MM[:SS][Z]` <-> hours since the epoch.
std::int64_t parse_timestamp_hour(const std::string& text);
std::string format_timestamp_hour(std::int64_t epoch_hour);

MinMax fit_min_max(std::span<const double> values);
Scaler fit_scaler(const ScenarioSeries& series);

struct NoiseSpec {
  double level = 0.0;
  std::uint64_t seed = 0;
};

// Noisy copy of `series`: price, carbon intensity and unmet power each get
// x + N(0, (level * |x|)^2). Demand absorbs the unmet-power noise so
// unmet = demand - res still holds. Level 0 returns an exact copy.
ScenarioSeries simulate_predictions(const ScenarioSeries& series, const NoiseSpec& spec);

enum class Scheme { kPredictionBased, kPredictionFree, kCommon };

std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& text);

// Feasible start range [first, last] for a K-step window that needs T steps
// of lookahead (PB) or history (PF).
struct WindowRange {
  std::size_t first = 0;
  std::size_t last = 0;
};
WindowRange episode_window_range(std::size_t series_length, std::size_t episode_len,
                                 std::size_t horizon, Scheme scheme);

std::size_t sample_episode_window(const ScenarioSeries& series, std::size_t episode_len,
                                  std::size_t horizon, Scheme scheme, std::mt19937_64& rng);

// Shape of the generated scenario. Times are hours of the day.
struct SyntheticProfile {
  double price_mean = 0.15;  // $/kWh
  double price_amplitude = 0.08;
  double price_peak_hour = 18.0;
  double carbon_mean = 350.0;  // gCO2/kWh
  double carbon_amplitude = 120.0;
  double carbon_peak_hour = 20.0;
  double demand_base_kw = 2800.0;
  double morning_peak_kw = 900.0;
  double morning_peak_hour = 8.0;
  double evening_peak_kw = 1800.0;
  double evening_peak_hour = 19.0;
  double peak_width_h = 2.0;
  double res_peak_kw = 1600.0;
  double res_noon_hour = 13.0;
  double res_width_h = 2.5;
  double noise_fraction = 0.03;  // multiplicative jitter on every variable
  std::int64_t start_epoch_hour = 473352;  // 2024-01-01T00:00Z
};

ScenarioSeries generate_synthetic(int days, std::uint64_t seed, const SyntheticProfile& profile = {});

}  // namespace microgrid
