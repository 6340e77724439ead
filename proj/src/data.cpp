#include "microgrid/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "microgrid/errors.hpp"

namespace microgrid {

namespace {

constexpr std::array<const char*, 5> kColumns = {"timestamp", "price", "carbon_intensity",
                                                 "demand_kw", "res_kw"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t begin = 0;
  while (true) {
    const auto comma = line.find(',', begin);
    cells.push_back(trim(std::string_view(line).substr(begin, comma - begin)));
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return cells;
}

std::string row_label(std::size_t row) { return "row " + std::to_string(row); }

double parse_number(const std::string& cell, std::size_t row, const char* column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError(row_label(row) + ": column '" + column + "' is not numeric: '" + cell + "'");
  }
  return value;
}

}  // namespace

ExogenousRecord make_record(std::int64_t epoch_hour, double price, double carbon_intensity,
                            double demand_kw, double res_kw) {
  return ExogenousRecord{epoch_hour, price, carbon_intensity, demand_kw, res_kw, demand_kw - res_kw};
}

double MinMax::scale_clamped(double x) const { return std::clamp(scale(x), 0.0, 1.0); }

std::int64_t parse_timestamp_hour(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail[8] = {0};
  const int n = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%7s", &y, &mo, &d, &h, &mi, &s, tail);
  if (n < 5) throw DataError("malformed timestamp '" + text + "'");
  if (n == 5) {
    // No seconds field; allow a trailing zone designator after minutes.
    const auto colon = text.find(':');
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 3);
    if (!rest.empty() && rest != "Z") throw DataError("malformed timestamp '" + text + "'");
  } else if (n == 7 && std::string(tail) != "Z") {
    throw DataError("unsupported timestamp suffix in '" + text + "'");
  }
  using namespace std::chrono;
  const year_month_day date{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!date.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 59)
    throw DataError("invalid timestamp '" + text + "'");
  if (mi != 0 || s != 0) throw DataError("timestamp '" + text + "' is not on the hour");
  const auto days_since_epoch = sys_days{date}.time_since_epoch().count();
  return static_cast<std::int64_t>(days_since_epoch) * 24 + h;
}

std::string format_timestamp_hour(std::int64_t epoch_hour) {
  using namespace std::chrono;
  const auto whole_days = static_cast<int>(epoch_hour >= 0 ? epoch_hour / 24 : (epoch_hour - 23) / 24);
  const auto hour = static_cast<int>(epoch_hour - static_cast<std::int64_t>(whole_days) * 24);
  const year_month_day date{sys_days{days{whole_days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:00:00Z", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()), hour);
  return buf;
}

ScenarioSeries parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("row 1: empty file, expected header");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
      static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
    line.erase(0, 3);
  }
  const auto header = split_row(line);
  std::array<std::size_t, kColumns.size()> position{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end())
      throw DataError("row 1: missing required column '" + std::string(kColumns[c]) + "'");
    position[c] = static_cast<std::size_t>(it - header.begin());
  }

  struct Parsed {
    ExogenousRecord record;
    std::size_t row;
  };
  std::vector<Parsed> parsed;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw DataError(row_label(row) + ": expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    std::int64_t hour = 0;
    try {
      hour = parse_timestamp_hour(cells[position[0]]);
    } catch (const DataError& e) {
      throw DataError(row_label(row) + ": " + e.what());
    }
    const double price = parse_number(cells[position[1]], row, kColumns[1]);
    const double carbon = parse_number(cells[position[2]], row, kColumns[2]);
    const double demand = parse_number(cells[position[3]], row, kColumns[3]);
    const double res = parse_number(cells[position[4]], row, kColumns[4]);
    if (demand < 0.0) throw DataError(row_label(row) + ": demand_kw must be >= 0");
    if (res < 0.0) throw DataError(row_label(row) + ": res_kw must be >= 0");
    parsed.push_back({make_record(hour, price, carbon, demand, res), row});
  }
  if (parsed.empty()) throw DataError("no data rows");

  std::stable_sort(parsed.begin(), parsed.end(), [](const Parsed& a, const Parsed& b) {
    return a.record.epoch_hour < b.record.epoch_hour;
  });
  for (std::size_t i = 1; i < parsed.size(); ++i) {
    const auto delta = parsed[i].record.epoch_hour - parsed[i - 1].record.epoch_hour;
    if (delta == 0)
      throw DataError(row_label(parsed[i].row) + ": duplicate timestamp " +
                      format_timestamp_hour(parsed[i].record.epoch_hour) + " (also row " +
                      std::to_string(parsed[i - 1].row) + ")");
    if (delta != 1)
      throw DataError(row_label(parsed[i].row) + ": gap of " + std::to_string(delta - 1) +
                      " hour(s) before " + format_timestamp_hour(parsed[i].record.epoch_hour));
  }

  ScenarioSeries series;
  series.records.reserve(parsed.size());
  for (const auto& p : parsed) series.records.push_back(p.record);
  return series;
}

ScenarioSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  return parse_csv(in);
}

void write_csv(const ScenarioSeries& series, std::ostream& out) {
  out << "timestamp,price,carbon_intensity,demand_kw,res_kw\n";
  char buf[160];
  for (const auto& r : series.records) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n",
                  format_timestamp_hour(r.epoch_hour).c_str(), r.price, r.carbon_intensity,
                  r.demand_kw, r.res_kw);
    out << buf;
  }
}

void write_csv(const ScenarioSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(series, out);
}

MinMax fit_min_max(std::span<const double> values) {
  if (values.empty()) throw DataError("cannot fit scaler on an empty column");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*lo < *hi)) throw DataError("cannot fit scaler on a constant column");
  return MinMax{*lo, *hi};
}

Scaler fit_scaler(const ScenarioSeries& series) {
  std::vector<double> price, carbon;
  price.reserve(series.size());
  carbon.reserve(series.size());
  for (const auto& r : series.records) {
    price.push_back(r.price);
    carbon.push_back(r.carbon_intensity);
  }
  Scaler scaler;
  try {
    scaler.price = fit_min_max(price);
  } catch (const DataError& e) {
    throw DataError(std::string("price: ") + e.what());
  }
  try {
    scaler.carbon = fit_min_max(carbon);
  } catch (const DataError& e) {
    throw DataError(std::string("carbon_intensity: ") + e.what());
  }
  return scaler;
}

ScenarioSeries simulate_predictions(const ScenarioSeries& series, const NoiseSpec& spec) {
  if (!(spec.level >= 0.0)) throw ContractViolation("noise level must be >= 0");
  ScenarioSeries out = series;
  if (spec.level == 0.0) return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (auto& r : out.records) {
    r.price += unit(rng) * spec.level * std::abs(r.price);
    r.carbon_intensity += unit(rng) * spec.level * std::abs(r.carbon_intensity);
    const double eps = unit(rng) * spec.level * std::abs(r.unmet_kw);
    r.demand_kw += eps;
    r.unmet_kw = r.demand_kw - r.res_kw;
  }
  return out;
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kPredictionBased: return "pb";
    case Scheme::kPredictionFree: return "pf";
    case Scheme::kCommon: return "common";
  }
  return "?";
}

Scheme parse_scheme(const std::string& text) {
  if (text == "pb") return Scheme::kPredictionBased;
  if (text == "pf") return Scheme::kPredictionFree;
  if (text == "common") return Scheme::kCommon;
  throw ConfigError("scheme", "expected pb, pf or common, got '" + text + "'");
}

WindowRange episode_window_range(std::size_t series_length, std::size_t episode_len,
                                 std::size_t horizon, Scheme scheme) {
  const std::size_t margin = scheme == Scheme::kCommon ? 0 : horizon;
  if (episode_len == 0) throw ContractViolation("episode length must be >= 1");
  if (series_length < episode_len + margin)
    throw ContractViolation("series of length " + std::to_string(series_length) +
                            " is too short for episode length " + std::to_string(episode_len) +
                            " with horizon " + std::to_string(margin));
  const std::size_t slack = series_length - episode_len - margin;
  if (scheme == Scheme::kPredictionFree) return {margin, margin + slack};
  return {0, slack};
}

std::size_t sample_episode_window(const ScenarioSeries& series, std::size_t episode_len,
                                  std::size_t horizon, Scheme scheme, std::mt19937_64& rng) {
  const WindowRange range = episode_window_range(series.size(), episode_len, horizon, scheme);
  std::uniform_int_distribution<std::size_t> start(range.first, range.last);
  return start(rng);
}

ScenarioSeries generate_synthetic(int days, std::uint64_t seed, const SyntheticProfile& p) {
  if (days < 1) throw ContractViolation("days must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, p.noise_fraction);
  const auto bump = [](double hour, double centre, double width) {
    // Circular distance on the 24 h clock.
    double d = std::fmod(std::abs(hour - centre), 24.0);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * (d / width) * (d / width));
  };
  const double two_pi = 2.0 * std::numbers::pi;

  ScenarioSeries series;
  series.records.reserve(static_cast<std::size_t>(days) * 24);
  for (int i = 0; i < days * 24; ++i) {
    const double hour = static_cast<double>(i % 24);
    const double price =
        p.price_mean + p.price_amplitude * std::cos(two_pi * (hour - p.price_peak_hour) / 24.0);
    const double carbon =
        p.carbon_mean + p.carbon_amplitude * std::cos(two_pi * (hour - p.carbon_peak_hour) / 24.0);
    const double demand = p.demand_base_kw +
                          p.morning_peak_kw * bump(hour, p.morning_peak_hour, p.peak_width_h) +
                          p.evening_peak_kw * bump(hour, p.evening_peak_hour, p.peak_width_h);
    const double res = p.res_peak_kw * bump(hour, p.res_noon_hour, p.res_width_h);
    const double jp = jitter(rng), jc = jitter(rng), jd = jitter(rng), jr = jitter(rng);
    series.records.push_back(make_record(
        p.start_epoch_hour + i, std::max(0.0, price * (1.0 + jp)),
        std::max(0.0, carbon * (1.0 + jc)), std::max(0.0, demand * (1.0 + jd)),
        std::max(0.0, res * (1.0 + jr))));
  }
  return series;
}

}  // namespace microgrid
