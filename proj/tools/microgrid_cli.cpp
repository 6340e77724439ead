#include <CLI11.hpp>
#include <iostream>

#include "microgrid/commands.hpp"
#include "microgrid/errors.hpp"

using namespace microgrid;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheme;
  std::optional<std::string> update;
  std::optional<std::string> arch;
  std::optional<double> noise;
  std::optional<int> episodes;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<std::string> checkpoint;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file (flat dotted keys)");
  cmd->add_option("--seed", f.seed, "RNG seed");
  cmd->add_option("--scheme", f.scheme, "State scheme")->check(CLI::IsMember({"pb", "pf", "common"}));
  cmd->add_option("--update", f.update, "Target update rule")->check(CLI::IsMember({"soft", "hard"}));
  cmd->add_option("--arch", f.arch, "Network variant")
      ->check(CLI::IsMember({"dqn", "ddqn", "dueling", "d3qn"}));
  cmd->add_option("--noise", f.noise, "Relative prediction noise level (PB only)");
  cmd->add_option("--episodes", f.episodes, "Training episodes");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--data", f.data, "Hourly scenario CSV");
  cmd->add_option("--checkpoint", f.checkpoint, "Model checkpoint");
  cmd->add_option("--set", f.overrides, "Override a config key (key=value), repeatable");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set", "expected key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.scheme) {
    cfg.scheme = parse_scheme(*f.scheme);
    cfg.scheme_explicit = true;
  }
  if (f.update) cfg.agent.update = parse_update_rule(*f.update);
  if (f.arch) cfg.agent.set_architecture(parse_architecture(*f.arch));
  if (f.noise) cfg.noise = *f.noise;
  if (f.episodes) cfg.episodes = *f.episodes;
  if (f.out) cfg.output_dir = *f.out;
  if (f.data) cfg.data_csv = *f.data;
  if (f.checkpoint) cfg.checkpoint = *f.checkpoint;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Battery dispatch for a grid-connected microgrid with deep Q-learning"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, sweep_f, oracle_f;
  auto* train_cmd = app.add_subcommand("train", "Train a Q-network and write a checkpoint");
  add_common(train_cmd, train_f);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint greedily");
  add_common(eval_cmd, eval_f);
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate a grid of configurations");
  add_common(sweep_cmd, sweep_f);

  auto* oracle_cmd = app.add_subcommand("oracle", "Optimal dispatch with perfect foresight");
  add_common(oracle_cmd, oracle_f);
  std::optional<std::size_t> oracle_start;
  std::optional<int> oracle_horizon;
  std::optional<std::size_t> oracle_length;
  bool oracle_dp = false;
  oracle_cmd->add_option("--start", oracle_start, "First hour of the window");
  oracle_cmd->add_option("--horizon", oracle_horizon, "Exhaustive search length (<= 8)");
  oracle_cmd->add_option("--length", oracle_length, "DP window length (0 = to the end)");
  oracle_cmd->add_flag("--dp", oracle_dp, "Use SOC-grid dynamic programming");

  auto* gendata_cmd = app.add_subcommand("gendata", "Write a synthetic hourly scenario CSV");
  int days = 28;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "data/synthetic_28d.csv";
  gendata_cmd->add_option("--days", days, "Number of days")->capture_default_str();
  gendata_cmd->add_option("--seed", gen_seed, "Jitter seed")->capture_default_str();
  gendata_cmd->add_option("--out", gen_out, "Output CSV path")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      cmd_train(resolve(train_f), std::cout);
    } else if (*eval_cmd) {
      cmd_eval(resolve(eval_f), std::cout);
    } else if (*sweep_cmd) {
      const auto art = cmd_sweep(resolve(sweep_f), std::cout);
      if (!art.all_ok) {
        for (const auto& r : art.rows)
          if (!r.ok) std::cerr << "error: " << r.error << '\n';
        return 1;
      }
    } else if (*oracle_cmd) {
      RunConfig cfg = resolve(oracle_f);
      if (oracle_dp) cfg.oracle_mode = "dp";
      if (oracle_start) cfg.oracle_start = *oracle_start;
      if (oracle_horizon) cfg.oracle_horizon = *oracle_horizon;
      if (oracle_length) cfg.oracle_length = *oracle_length;
      cmd_oracle(cfg, std::cout);
    } else if (*gendata_cmd) {
      std::cout << "wrote " << cmd_gendata(days, gen_seed, gen_out).string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
