#include "microgrid/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "microgrid/errors.hpp"

namespace microgrid {

namespace {

using nlohmann::json;

double as_double(const std::string& key, const json& v) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

int as_int(const std::string& key, const json& v) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<int>();
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string as_string(const std::string& key, const json& v) {
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

template <class T, class F>
std::vector<T> as_list(const std::string& key, const json& v, F&& convert) {
  if (!v.is_array()) throw ConfigError(key, "expected a list");
  std::vector<T> out;
  for (const auto& item : v) out.push_back(convert(key, item));
  return out;
}

Scheme scheme_of(const std::string& key, const json& v) {
  try {
    return parse_scheme(as_string(key, v));
  } catch (const ConfigError& e) {
    throw ConfigError(key, e.what());
  }
}

using Setter = std::function<void(RunConfig&, const std::string&, const json&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"data.csv", [](RunConfig& c, const std::string& k, const json& v) { c.data_csv = as_string(k, v); }},
      {"output.dir", [](RunConfig& c, const std::string& k, const json& v) { c.output_dir = as_string(k, v); }},
      {"checkpoint", [](RunConfig& c, const std::string& k, const json& v) { c.checkpoint = as_string(k, v); }},

      {"env.capacity_kwh",
       [](RunConfig& c, const std::string& k, const json& v) {
         const double old = c.env.capacity_kwh;
         c.env.capacity_kwh = as_double(k, v);
         // Keep the 10%/90% SOC window when it was still tied to capacity.
         if (c.env.soc_max_kwh == 0.9 * old) c.env.soc_max_kwh = 0.9 * c.env.capacity_kwh;
         if (c.env.soc_min_kwh == 0.1 * old) c.env.soc_min_kwh = 0.1 * c.env.capacity_kwh;
       }},
      {"env.soc_max_kwh", [](RunConfig& c, const std::string& k, const json& v) { c.env.soc_max_kwh = as_double(k, v); }},
      {"env.soc_min_kwh", [](RunConfig& c, const std::string& k, const json& v) { c.env.soc_min_kwh = as_double(k, v); }},
      {"env.transfer_cap_kwh", [](RunConfig& c, const std::string& k, const json& v) { c.env.transfer_cap_kwh = as_double(k, v); }},
      {"env.efficiency", [](RunConfig& c, const std::string& k, const json& v) { c.env.efficiency = as_double(k, v); }},
      {"env.peak_limit_kw", [](RunConfig& c, const std::string& k, const json& v) { c.env.peak_limit_kw = as_double(k, v); }},
      {"env.dt_h", [](RunConfig& c, const std::string& k, const json& v) { c.env.dt_h = as_double(k, v); }},
      {"env.standby_loss_kw", [](RunConfig& c, const std::string& k, const json& v) { c.env.standby_loss_kw = as_double(k, v); }},
      {"env.alpha", [](RunConfig& c, const std::string& k, const json& v) { c.env.alpha = as_double(k, v); }},
      {"env.beta", [](RunConfig& c, const std::string& k, const json& v) { c.env.beta = as_double(k, v); }},
      {"env.lambda", [](RunConfig& c, const std::string& k, const json& v) { c.env.lambda = as_double(k, v); }},

      {"agent.gamma", [](RunConfig& c, const std::string& k, const json& v) { c.agent.gamma = as_double(k, v); }},
      {"agent.lr", [](RunConfig& c, const std::string& k, const json& v) { c.agent.lr = as_double(k, v); }},
      {"agent.batch", [](RunConfig& c, const std::string& k, const json& v) { c.agent.batch = as_int(k, v); }},
      {"agent.tau", [](RunConfig& c, const std::string& k, const json& v) { c.agent.tau = as_double(k, v); }},
      {"agent.target_period", [](RunConfig& c, const std::string& k, const json& v) { c.agent.target_period = as_int(k, v); }},
      {"agent.episode_len", [](RunConfig& c, const std::string& k, const json& v) { c.agent.episode_len = as_int(k, v); }},
      {"agent.epsilon_start", [](RunConfig& c, const std::string& k, const json& v) { c.agent.epsilon_start = as_double(k, v); }},
      {"agent.epsilon_decay", [](RunConfig& c, const std::string& k, const json& v) { c.agent.epsilon_decay = as_double(k, v); }},
      {"agent.epsilon_floor", [](RunConfig& c, const std::string& k, const json& v) { c.agent.epsilon_floor = as_double(k, v); }},
      {"agent.arch",
       [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.agent.set_architecture(parse_architecture(as_string(k, v)));
         } catch (const ConfigError& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"agent.update",
       [](RunConfig& c, const std::string& k, const json& v) {
         try {
           c.agent.update = parse_update_rule(as_string(k, v));
         } catch (const ConfigError& e) {
           throw ConfigError(k, e.what());
         }
       }},
      {"agent.replay_capacity", [](RunConfig& c, const std::string& k, const json& v) { c.agent.replay_capacity = as_int(k, v); }},
      {"agent.hidden_layers", [](RunConfig& c, const std::string& k, const json& v) { c.agent.hidden_layers = as_int(k, v); }},
      {"agent.hidden_units", [](RunConfig& c, const std::string& k, const json& v) { c.agent.hidden_units = as_int(k, v); }},
      {"agent.reward_scale", [](RunConfig& c, const std::string& k, const json& v) { c.agent.reward_scale = as_double(k, v); }},

      {"scheme",
       [](RunConfig& c, const std::string& k, const json& v) {
         c.scheme = scheme_of(k, v);
         c.scheme_explicit = true;
       }},
      {"horizon", [](RunConfig& c, const std::string& k, const json& v) { c.agent.horizon = as_int(k, v); }},
      {"episodes", [](RunConfig& c, const std::string& k, const json& v) { c.episodes = as_int(k, v); }},
      {"seed", [](RunConfig& c, const std::string& k, const json& v) { c.seed = as_u64(k, v); }},
      {"noise", [](RunConfig& c, const std::string& k, const json& v) { c.noise = as_double(k, v); }},

      {"eval.initial_soc_kwh", [](RunConfig& c, const std::string& k, const json& v) { c.eval_initial_soc_kwh = as_double(k, v); }},
      {"eval.range",
       [](RunConfig& c, const std::string& k, const json& v) {
         const std::string s = as_string(k, v);
         if (s == "shared") c.eval_range = EvalRangeKind::kShared;
         else if (s == "full") c.eval_range = EvalRangeKind::kFull;
         else throw ConfigError(k, "expected shared or full");
       }},
      {"eval.epsilon", [](RunConfig& c, const std::string& k, const json& v) { c.eval_epsilon = as_double(k, v); }},

      {"sweep.schemes",
       [](RunConfig& c, const std::string& k, const json& v) { c.sweep_schemes = as_list<Scheme>(k, v, scheme_of); }},
      {"sweep.archs",
       [](RunConfig& c, const std::string& k, const json& v) {
         c.sweep_archs = as_list<Architecture>(k, v, [](const std::string& key, const json& item) {
           try {
             return parse_architecture(as_string(key, item));
           } catch (const ConfigError& e) {
             throw ConfigError(key, e.what());
           }
         });
       }},
      {"sweep.updates",
       [](RunConfig& c, const std::string& k, const json& v) {
         c.sweep_updates = as_list<UpdateRule>(k, v, [](const std::string& key, const json& item) {
           try {
             return parse_update_rule(as_string(key, item));
           } catch (const ConfigError& e) {
             throw ConfigError(key, e.what());
           }
         });
       }},
      {"sweep.noise_levels",
       [](RunConfig& c, const std::string& k, const json& v) { c.sweep_noise_levels = as_list<double>(k, v, as_double); }},
      {"sweep.seeds",
       [](RunConfig& c, const std::string& k, const json& v) { c.sweep_seeds = as_list<std::uint64_t>(k, v, as_u64); }},

      {"oracle.mode",
       [](RunConfig& c, const std::string& k, const json& v) {
         c.oracle_mode = as_string(k, v);
         if (c.oracle_mode != "exhaustive" && c.oracle_mode != "dp")
           throw ConfigError(k, "expected exhaustive or dp");
       }},
      {"oracle.start", [](RunConfig& c, const std::string& k, const json& v) { c.oracle_start = as_u64(k, v); }},
      {"oracle.horizon", [](RunConfig& c, const std::string& k, const json& v) { c.oracle_horizon = as_int(k, v); }},
      {"oracle.length", [](RunConfig& c, const std::string& k, const json& v) { c.oracle_length = as_u64(k, v); }},
      {"oracle.soc_bins", [](RunConfig& c, const std::string& k, const json& v) { c.oracle_soc_bins = as_int(k, v); }},
      {"oracle.initial_soc_kwh", [](RunConfig& c, const std::string& k, const json& v) { c.oracle_initial_soc_kwh = as_double(k, v); }},
      {"oracle.gamma", [](RunConfig& c, const std::string& k, const json& v) { c.oracle_gamma = as_double(k, v); }},
  };
  return table;
}

void set_key(RunConfig& cfg, const std::string& key, const json& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(key, "unknown configuration key");
  it->second(cfg, key, value);
}

}  // namespace

RunConfig run_config_from_json(const json& flat) {
  if (!flat.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
  RunConfig cfg;
  // Capacity first so the derived SOC window does not clobber explicit bounds.
  if (flat.contains("env.capacity_kwh")) set_key(cfg, "env.capacity_kwh", flat.at("env.capacity_kwh"));
  for (const auto& [key, value] : flat.items()) {
    if (key == "env.capacity_kwh") continue;
    set_key(cfg, key, value);
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path.string() + "'");
  json flat;
  try {
    flat = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
  }
  return run_config_from_json(flat);
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) parsed = value;
  set_key(cfg, key, parsed);
}

json to_json(const RunConfig& c) {
  json j = {
      {"data.csv", c.data_csv.string()},
      {"output.dir", c.output_dir.string()},
      {"checkpoint", c.checkpoint.string()},
      {"env.capacity_kwh", c.env.capacity_kwh},
      {"env.soc_max_kwh", c.env.soc_max_kwh},
      {"env.soc_min_kwh", c.env.soc_min_kwh},
      {"env.transfer_cap_kwh", c.env.transfer_cap_kwh},
      {"env.efficiency", c.env.efficiency},
      {"env.peak_limit_kw", c.env.peak_limit_kw},
      {"env.dt_h", c.env.dt_h},
      {"env.standby_loss_kw", c.env.standby_loss_kw},
      {"env.alpha", c.env.alpha},
      {"env.beta", c.env.beta},
      {"env.lambda", c.env.lambda},
      {"agent.gamma", c.agent.gamma},
      {"agent.lr", c.agent.lr},
      {"agent.batch", c.agent.batch},
      {"agent.tau", c.agent.tau},
      {"agent.target_period", c.agent.target_period},
      {"agent.episode_len", c.agent.episode_len},
      {"agent.epsilon_start", c.agent.epsilon_start},
      {"agent.epsilon_decay", c.agent.epsilon_decay},
      {"agent.epsilon_floor", c.agent.epsilon_floor},
      {"agent.arch", to_string(c.agent.architecture())},
      {"agent.update", to_string(c.agent.update)},
      {"agent.replay_capacity", c.agent.replay_capacity},
      {"agent.hidden_layers", c.agent.hidden_layers},
      {"agent.hidden_units", c.agent.hidden_units},
      {"agent.reward_scale", c.agent.reward_scale},
      {"scheme", to_string(c.scheme)},
      {"horizon", c.agent.horizon},
      {"episodes", c.episodes},
      {"seed", c.seed},
      {"noise", c.noise},
      {"eval.initial_soc_kwh", c.eval_initial_soc_kwh},
      {"eval.range", c.eval_range == EvalRangeKind::kShared ? "shared" : "full"},
      {"eval.epsilon", c.eval_epsilon},
      {"oracle.mode", c.oracle_mode},
      {"oracle.start", c.oracle_start},
      {"oracle.horizon", c.oracle_horizon},
      {"oracle.length", c.oracle_length},
      {"oracle.soc_bins", c.oracle_soc_bins},
      {"oracle.initial_soc_kwh", c.oracle_initial_soc_kwh},
      {"oracle.gamma", c.oracle_gamma},
  };
  if (c.sweep_schemes) {
    json list = json::array();
    for (Scheme s : *c.sweep_schemes) list.push_back(to_string(s));
    j["sweep.schemes"] = list;
  }
  if (c.sweep_archs) {
    json list = json::array();
    for (Architecture a : *c.sweep_archs) list.push_back(to_string(a));
    j["sweep.archs"] = list;
  }
  if (c.sweep_updates) {
    json list = json::array();
    for (UpdateRule u : *c.sweep_updates) list.push_back(to_string(u));
    j["sweep.updates"] = list;
  }
  if (c.sweep_noise_levels) j["sweep.noise_levels"] = *c.sweep_noise_levels;
  if (c.sweep_seeds) j["sweep.seeds"] = *c.sweep_seeds;
  return j;
}

void validate(const RunConfig& cfg, bool need_data, bool need_checkpoint) {
  cfg.env.validate();
  cfg.env.validate_reward_weights();
  cfg.agent.validate();
  if (cfg.episodes < 0) throw ConfigError("episodes", "must be >= 0");
  if (!(cfg.noise >= 0.0)) throw ConfigError("noise", "must be >= 0");
  if (!(cfg.eval_epsilon >= 0.0 && cfg.eval_epsilon <= 1.0))
    throw ConfigError("eval.epsilon", "must lie in [0, 1]");
  if (!(cfg.eval_initial_soc_kwh >= cfg.env.soc_min_kwh && cfg.eval_initial_soc_kwh <= cfg.env.soc_max_kwh))
    throw ConfigError("eval.initial_soc_kwh", "must lie within the SOC bounds");
  if (!(cfg.oracle_initial_soc_kwh >= cfg.env.soc_min_kwh && cfg.oracle_initial_soc_kwh <= cfg.env.soc_max_kwh))
    throw ConfigError("oracle.initial_soc_kwh", "must lie within the SOC bounds");
  if (!(cfg.oracle_gamma >= 0.0 && cfg.oracle_gamma <= 1.0))
    throw ConfigError("oracle.gamma", "must lie in [0, 1]");
  if (need_data) {
    if (cfg.data_csv.empty()) throw ConfigError("data.csv", "no data file given");
    if (!std::filesystem::exists(cfg.data_csv))
      throw ConfigError("data.csv", "file '" + cfg.data_csv.string() + "' does not exist");
  }
  if (need_checkpoint) {
    if (cfg.checkpoint.empty()) throw ConfigError("checkpoint", "no checkpoint given");
    if (!std::filesystem::exists(cfg.checkpoint))
      throw ConfigError("checkpoint", "file '" + cfg.checkpoint.string() + "' does not exist");
  }
}

}  // namespace microgrid
