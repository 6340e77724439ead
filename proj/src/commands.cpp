#include "microgrid/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "microgrid/checkpoint.hpp"
#include "microgrid/errors.hpp"

namespace microgrid {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_level(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void write_json(const json& j, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json components_json(const RewardComponents& c) {
  return {{"market", c.market},
          {"carbon", c.carbon},
          {"peak_penalty", c.peak_penalty},
          {"degradation", c.degradation}};
}

StepRange eval_range(const RunConfig& cfg, Scheme scheme, int horizon, std::size_t n) {
  return cfg.eval_range == EvalRangeKind::kShared ? shared_range(horizon, n)
                                                  : full_range(scheme, horizon, n);
}

}  // namespace

std::string run_tag(Scheme scheme, Architecture arch, UpdateRule update, std::uint64_t seed) {
  return to_string(scheme) + "_" + to_string(arch) + "_" + to_string(update) + "_seed" +
         std::to_string(seed);
}

std::string eval_tag(Scheme scheme, Architecture arch, UpdateRule update, double noise,
                     std::uint64_t seed) {
  return to_string(scheme) + "_" + to_string(arch) + "_" + to_string(update) + "_noise" +
         fmt_level(noise) + "_seed" + std::to_string(seed);
}

int worker_count_from_env() {
  const char* raw = std::getenv("MICROGRID_WORKERS");
  if (!raw || !*raw) return 1;
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("MICROGRID_WORKERS", "expected a positive integer");
  return static_cast<int>(n);
}

void write_train_trace(const std::vector<EpisodeRecord>& trace, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "episode,cumulative_reward,epsilon,loss_mean\n";
  for (const auto& r : trace) {
    out << r.episode << ',' << fmt(r.reward) << ',' << fmt(r.epsilon) << ','
        << (std::isnan(r.loss_mean) ? std::string("nan") : fmt(r.loss_mean)) << '\n';
  }
}

void write_eval_trace(const EvalReport& report, const ScenarioSeries& series,
                      const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "t,timestamp,action,action_level,soc_before_kwh,p_b_kw,p_g_kw,curtailed_kw,soc_after_kwh,"
         "reward,market,carbon,peak_penalty,degradation,clipped,peak_violated\n";
  for (const auto& s : report.trace) {
    out << s.t << ',' << format_timestamp_hour(series[s.t].epoch_hour) << ',' << s.action << ','
        << fmt(kActionLevels[static_cast<std::size_t>(s.action)]) << ',' << fmt(s.soc_before) << ','
        << fmt(s.p_b) << ',' << fmt(s.p_g) << ',' << fmt(s.curtailed) << ',' << fmt(s.soc_after)
        << ',' << fmt(s.reward) << ',' << fmt(s.components.market) << ','
        << fmt(s.components.carbon) << ',' << fmt(s.components.peak_penalty) << ','
        << fmt(s.components.degradation) << ',' << (s.clipped ? 1 : 0) << ','
        << (s.peak_violated ? 1 : 0) << '\n';
  }
}

TrainArtifacts cmd_train(const RunConfig& cfg, std::ostream& log) {
  validate(cfg, /*need_data=*/true, /*need_checkpoint=*/false);
  const ScenarioSeries series = load_csv(cfg.data_csv);
  std::filesystem::create_directories(cfg.output_dir);
  const std::string tag = run_tag(cfg.scheme, cfg.agent.architecture(), cfg.agent.update, cfg.seed);

  TrainArtifacts art;
  art.config_json = cfg.output_dir / ("config_" + tag + ".json");
  write_json(to_json(cfg), art.config_json);

  log << "train " << tag << ": " << cfg.episodes << " episodes on " << series.size()
      << " hourly records\n";
  TrainHooks hooks;
  const int report_every = std::max(1, cfg.episodes / 10);
  hooks.on_episode = [&](const EpisodeRecord& r) {
    if ((r.episode + 1) % report_every == 0)
      log << "  episode " << r.episode + 1 << " reward " << r.reward << " epsilon " << r.epsilon << '\n';
  };
  art.result = train(series, cfg.scheme, cfg.env, cfg.agent, cfg.episodes, cfg.seed, std::nullopt, hooks);

  const Checkpoint ckpt{art.result.online, cfg.scheme, cfg.agent.horizon, cfg.agent.double_q,
                        cfg.agent.update, art.result.scaler, cfg.env};
  art.checkpoint = cfg.output_dir / ("model_" + tag + ".ckpt");
  const auto bytes = serialize_checkpoint(ckpt);
  {
    auto out = open_out(art.checkpoint);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  art.checkpoint_sha256 = sha256_hex(bytes);
  art.trace_csv = cfg.output_dir / ("train_" + tag + ".csv");
  write_train_trace(art.result.trace, art.trace_csv);
  log << "  wrote " << art.checkpoint.string() << " (sha256 " << art.checkpoint_sha256 << ")\n";
  return art;
}

EvalArtifacts cmd_eval(const RunConfig& cfg, std::ostream& log) {
  validate(cfg, /*need_data=*/true, /*need_checkpoint=*/true);
  const Checkpoint model = load_checkpoint(cfg.checkpoint);
  if (cfg.scheme_explicit) {
    const std::size_t requested = state_dim(cfg.scheme, cfg.agent.horizon);
    if (cfg.scheme != model.scheme || static_cast<int>(requested) != model.params.input_dim)
      throw ConfigError("scheme", "checkpoint input dimension " + std::to_string(model.params.input_dim) +
                                      " (" + to_string(model.scheme) + ", T=" +
                                      std::to_string(model.horizon) + ") does not match requested " +
                                      to_string(cfg.scheme) + " with T=" +
                                      std::to_string(cfg.agent.horizon) + " (dimension " +
                                      std::to_string(requested) + ")");
  }
  const ScenarioSeries actual = load_csv(cfg.data_csv);

  double noise = cfg.noise;
  std::optional<ScenarioSeries> predicted;
  if (model.scheme == Scheme::kPredictionBased) {
    predicted = simulate_predictions(actual, NoiseSpec{noise, cfg.seed});
  } else if (noise > 0.0) {
    log << "warning: " << to_string(model.scheme)
        << " checkpoint does not use predictions; --noise ignored\n";
    noise = 0.0;
  }

  const StepRange range = eval_range(cfg, model.scheme, model.horizon, actual.size());
  EvalArtifacts art;
  art.report = rollout(model, actual, predicted ? &*predicted : nullptr,
                       BatteryState{cfg.eval_initial_soc_kwh}, range, cfg.eval_epsilon, cfg.seed);

  std::filesystem::create_directories(cfg.output_dir);
  const Architecture arch = architecture_of(model.double_q, model.params.arch.dueling);
  const std::string tag = eval_tag(model.scheme, arch, model.update, noise, cfg.seed);
  art.summary_json = cfg.output_dir / ("eval_" + tag + ".json");
  art.trace_csv = cfg.output_dir / ("eval_" + tag + "_trace.csv");
  write_json(json{{"scheme", to_string(model.scheme)},
                  {"arch", to_string(arch)},
                  {"update", to_string(model.update)},
                  {"horizon", model.horizon},
                  {"noise", noise},
                  {"seed", cfg.seed},
                  {"checkpoint_sha256", sha256_file(cfg.checkpoint)},
                  {"initial_soc_kwh", cfg.eval_initial_soc_kwh},
                  {"epsilon", cfg.eval_epsilon},
                  {"range_begin", range.begin},
                  {"range_end", range.end},
                  {"steps", art.report.trace.size()},
                  {"cumulative_reward", art.report.cumulative_reward},
                  {"component_totals", components_json(art.report.component_totals)},
                  {"peak_violation_hours", art.report.peak_violation_hours}},
             art.summary_json);
  write_eval_trace(art.report, actual, art.trace_csv);
  write_json(to_json(cfg), cfg.output_dir / ("eval_" + tag + "_config.json"));
  log << "eval " << tag << ": cumulative reward " << art.report.cumulative_reward << " over "
      << art.report.trace.size() << " steps\n";
  return art;
}

SweepArtifacts cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  const auto check_axis = [](const auto& axis, const char* key) {
    if (axis && axis->empty()) throw ConfigError(key, "sweep axis is empty");
  };
  check_axis(cfg.sweep_schemes, "sweep.schemes");
  check_axis(cfg.sweep_archs, "sweep.archs");
  check_axis(cfg.sweep_updates, "sweep.updates");
  check_axis(cfg.sweep_noise_levels, "sweep.noise_levels");
  check_axis(cfg.sweep_seeds, "sweep.seeds");
  if (!cfg.sweep_schemes && !cfg.sweep_archs && !cfg.sweep_updates && !cfg.sweep_noise_levels &&
      !cfg.sweep_seeds)
    throw ConfigError("sweep", "no sweep axis configured");
  validate(cfg, /*need_data=*/true, /*need_checkpoint=*/false);

  const auto schemes = cfg.sweep_schemes.value_or(std::vector<Scheme>{cfg.scheme});
  const auto archs = cfg.sweep_archs.value_or(std::vector<Architecture>{cfg.agent.architecture()});
  const auto updates = cfg.sweep_updates.value_or(std::vector<UpdateRule>{cfg.agent.update});
  const auto levels = cfg.sweep_noise_levels.value_or(std::vector<double>{cfg.noise});
  const auto seeds = cfg.sweep_seeds.value_or(std::vector<std::uint64_t>{cfg.seed});

  struct Cell {
    RunConfig cfg;
    std::vector<SweepRow> rows;
    std::string log;
  };
  std::vector<Cell> cells;
  for (Scheme s : schemes)
    for (Architecture a : archs)
      for (UpdateRule u : updates)
        for (std::uint64_t seed : seeds) {
          Cell cell;
          cell.cfg = cfg;
          cell.cfg.scheme = s;
          cell.cfg.scheme_explicit = true;
          cell.cfg.agent.set_architecture(a);
          cell.cfg.agent.update = u;
          cell.cfg.seed = seed;
          cell.cfg.sweep_schemes.reset();
          cell.cfg.sweep_archs.reset();
          cell.cfg.sweep_updates.reset();
          cell.cfg.sweep_noise_levels.reset();
          cell.cfg.sweep_seeds.reset();
          cells.push_back(std::move(cell));
        }

  const auto run_cell = [&levels](Cell& cell) {
    std::ostringstream cell_log;
    SweepRow base;
    base.scheme = cell.cfg.scheme;
    base.arch = cell.cfg.agent.architecture();
    base.update = cell.cfg.agent.update;
    base.seed = cell.cfg.seed;
    std::optional<TrainArtifacts> trained;
    std::string train_error;
    try {
      trained = cmd_train(cell.cfg, cell_log);
    } catch (const std::exception& e) {
      train_error = e.what();
    }
    for (double level : levels) {
      SweepRow row = base;
      row.noise = level;
      if (!trained) {
        row.error = "train failed: " + train_error;
        cell.rows.push_back(row);
        continue;
      }
      const auto& trace = trained->result.trace;
      const std::size_t tail = std::min<std::size_t>(100, trace.size());
      double sum = 0.0;
      for (std::size_t i = trace.size() - tail; i < trace.size(); ++i) sum += trace[i].reward;
      row.train_final_reward = tail > 0 ? sum / static_cast<double>(tail) : 0.0;
      row.checkpoint_sha256 = trained->checkpoint_sha256;
      try {
        RunConfig eval_cfg = cell.cfg;
        eval_cfg.checkpoint = trained->checkpoint;
        eval_cfg.noise = cell.cfg.scheme == Scheme::kPredictionBased ? level : 0.0;
        row.eval_reward = cmd_eval(eval_cfg, cell_log).report.cumulative_reward;
        row.ok = true;
      } catch (const std::exception& e) {
        row.error = std::string("eval failed: ") + e.what();
      }
      cell.rows.push_back(row);
    }
    cell.log = cell_log.str();
  };

  const int workers = std::max(1, std::min<int>(worker_count_from_env(), static_cast<int>(cells.size())));
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(cells[i]);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  SweepArtifacts art;
  for (auto& cell : cells) {
    log << cell.log;
    for (auto& row : cell.rows) {
      art.all_ok = art.all_ok && row.ok;
      art.rows.push_back(std::move(row));
    }
  }
  std::filesystem::create_directories(cfg.output_dir);
  art.table_csv = cfg.output_dir / "sweep.csv";
  auto out = open_out(art.table_csv);
  out << "scheme,arch,update,noise,seed,status,train_final_reward,eval_reward,checkpoint_sha256,error\n";
  for (const auto& r : art.rows) {
    std::string error = r.error;
    std::replace(error.begin(), error.end(), ',', ';');
    std::replace(error.begin(), error.end(), '\n', ' ');
    out << to_string(r.scheme) << ',' << to_string(r.arch) << ',' << to_string(r.update) << ','
        << fmt_level(r.noise) << ',' << r.seed << ',' << (r.ok ? "ok" : "error") << ','
        << fmt(r.train_final_reward) << ',' << fmt(r.eval_reward) << ',' << r.checkpoint_sha256
        << ',' << error << '\n';
  }
  log << "sweep: " << art.rows.size() << " rows written to " << art.table_csv.string() << '\n';
  return art;
}

OracleArtifacts cmd_oracle(const RunConfig& cfg, std::ostream& log) {
  validate(cfg, /*need_data=*/true, /*need_checkpoint=*/false);
  const ScenarioSeries actual = load_csv(cfg.data_csv);
  const Scaler scaler = fit_scaler(actual);
  const BatteryState soc{cfg.oracle_initial_soc_kwh};
  if (cfg.oracle_start >= actual.size())
    throw ConfigError("oracle.start", "window start " + std::to_string(cfg.oracle_start) +
                                          " is outside the series of length " +
                                          std::to_string(actual.size()));

  OracleArtifacts art;
  std::size_t length = 0;
  json extra = json::object();
  if (cfg.oracle_mode == "exhaustive") {
    if (cfg.oracle_horizon > kMaxExhaustiveHorizon || cfg.oracle_horizon < 1)
      throw ConfigError("oracle.horizon", "must lie in [1, " + std::to_string(kMaxExhaustiveHorizon) +
                                              "] for exhaustive enumeration");
    length = static_cast<std::size_t>(cfg.oracle_horizon);
    if (cfg.oracle_start + length > actual.size())
      throw ConfigError("oracle.horizon", "window runs past the end of the series");
    const OracleResult r = exhaustive_oracle(actual, cfg.oracle_start, cfg.oracle_horizon, scaler,
                                             cfg.env, soc, cfg.oracle_gamma);
    art.actions = r.actions;
    art.reward = r.reward;
  } else {
    length = cfg.oracle_length == 0 ? actual.size() - cfg.oracle_start : cfg.oracle_length;
    if (cfg.oracle_start + length > actual.size())
      throw ConfigError("oracle.length", "window runs past the end of the series");
    if (cfg.oracle_soc_bins < 2) throw ConfigError("oracle.soc_bins", "must be >= 2");
    const DpResult r = dp_oracle(actual, cfg.oracle_start, length, scaler, cfg.env, soc,
                                 cfg.oracle_soc_bins, cfg.oracle_gamma);
    art.actions = r.actions;
    art.reward = r.dispatch_reward;
    extra["soc_bins"] = cfg.oracle_soc_bins;
  }

  RolloutSpec spec;
  spec.scheme = Scheme::kCommon;
  spec.scaler = scaler;
  spec.env = cfg.env;
  spec.initial_soc = soc;
  spec.range = StepRange{cfg.oracle_start, cfg.oracle_start + length};
  // Idle and myopic baselines for context (undiscounted).
  art.idle_reward = rollout(constant_policy(2), actual, nullptr, spec).cumulative_reward;
  art.myopic_reward = rollout(myopic_policy(actual, scaler, cfg.env), actual, nullptr, spec).cumulative_reward;

  std::filesystem::create_directories(cfg.output_dir);
  art.report_json = cfg.output_dir / ("oracle_" + cfg.oracle_mode + "_start" +
                                      std::to_string(cfg.oracle_start) + "_len" +
                                      std::to_string(length) + ".json");
  json levels = json::array();
  for (int a : art.actions) levels.push_back(kActionLevels[static_cast<std::size_t>(a)]);
  json report = {{"mode", cfg.oracle_mode},
                 {"start", cfg.oracle_start},
                 {"length", length},
                 {"initial_soc_kwh", cfg.oracle_initial_soc_kwh},
                 {"gamma", cfg.oracle_gamma},
                 {"actions", art.actions},
                 {"action_levels", levels},
                 {"reward", art.reward},
                 {"idle_reward", art.idle_reward},
                 {"myopic_reward", art.myopic_reward}};
  report.update(extra);
  write_json(report, art.report_json);
  auto snapshot = art.report_json;
  write_json(to_json(cfg), snapshot.replace_extension().concat("_config.json"));

  log << "oracle " << cfg.oracle_mode << " [" << cfg.oracle_start << ", "
      << cfg.oracle_start + length << "): reward " << art.reward << " (idle " << art.idle_reward
      << ", myopic " << art.myopic_reward << ")\n";
  if (art.actions.size() <= 48) {
    log << "  actions:";
    for (int a : art.actions) log << ' ' << kActionLevels[static_cast<std::size_t>(a)];
    log << '\n';
  }
  return art;
}

std::filesystem::path cmd_gendata(int days, std::uint64_t seed, const std::filesystem::path& out) {
  if (days < 1) throw ConfigError("--days", "must be >= 1");
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_csv(generate_synthetic(days, seed), out);
  return out;
}

}  // namespace microgrid
