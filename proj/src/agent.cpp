#include "microgrid/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "microgrid/errors.hpp"

namespace microgrid {

std::string to_string(UpdateRule rule) { return rule == UpdateRule::kSoft ? "soft" : "hard"; }

UpdateRule parse_update_rule(const std::string& text) {
  if (text == "soft") return UpdateRule::kSoft;
  if (text == "hard") return UpdateRule::kHard;
  throw ConfigError("agent.update", "expected soft or hard, got '" + text + "'");
}

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kDqn: return "dqn";
    case Architecture::kDdqn: return "ddqn";
    case Architecture::kDueling: return "dueling";
    case Architecture::kD3qn: return "d3qn";
  }
  return "?";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "dqn") return Architecture::kDqn;
  if (text == "ddqn") return Architecture::kDdqn;
  if (text == "dueling") return Architecture::kDueling;
  if (text == "d3qn") return Architecture::kD3qn;
  throw ConfigError("agent.arch", "expected dqn, ddqn, dueling or d3qn, got '" + text + "'");
}

Architecture architecture_of(bool double_q, bool dueling) {
  if (double_q) return dueling ? Architecture::kD3qn : Architecture::kDdqn;
  return dueling ? Architecture::kDueling : Architecture::kDqn;
}

void AgentConfig::set_architecture(Architecture arch) {
  double_q = arch == Architecture::kDdqn || arch == Architecture::kD3qn;
  dueling = arch == Architecture::kDueling || arch == Architecture::kD3qn;
}

NetArchitecture AgentConfig::net_architecture() const {
  return NetArchitecture{dueling, hidden_layers, hidden_units};
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma", "must lie in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("agent.lr", "must be positive");
  if (batch < 1) throw ConfigError("agent.batch", "must be >= 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("agent.tau", "must lie in (0, 1]");
  if (target_period < 1) throw ConfigError("agent.target_period", "must be >= 1");
  if (episode_len < 1) throw ConfigError("agent.episode_len", "must be >= 1");
  if (horizon < 0) throw ConfigError("horizon", "must be >= 0");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0))
    throw ConfigError("agent.epsilon_start", "must lie in [0, 1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0))
    throw ConfigError("agent.epsilon_decay", "must lie in (0, 1]");
  if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0))
    throw ConfigError("agent.epsilon_floor", "must lie in [0, 1]");
  if (replay_capacity < 1) throw ConfigError("agent.replay_capacity", "must be >= 1");
  if (batch > replay_capacity)
    throw ConfigError("agent.batch", "batch " + std::to_string(batch) +
                                         " exceeds replay capacity " +
                                         std::to_string(replay_capacity));
  if (hidden_layers < 1) throw ConfigError("agent.hidden_layers", "must be >= 1");
  if (hidden_units < 1) throw ConfigError("agent.hidden_units", "must be >= 1");
  if (!(reward_scale > 0.0)) throw ConfigError("agent.reward_scale", "must be positive");
}

double epsilon_at(std::int64_t global_step, const AgentConfig& cfg) {
  if (global_step < 0) throw ContractViolation("step must be >= 0");
  const double decayed =
      cfg.epsilon_start * std::pow(cfg.epsilon_decay, static_cast<double>(global_step));
  return std::max(cfg.epsilon_floor, decayed);
}

int argmax_action(const std::array<double, kNumActions>& q) {
  int best = 0;
  for (int i = 1; i < kNumActions; ++i) {
    if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

int select_action(const NetParams& params, std::span<const double> state, double epsilon,
                  std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractViolation("epsilon must lie in [0, 1]");
  if (epsilon > 0.0) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
      std::uniform_int_distribution<int> pick(0, kNumActions - 1);
      return pick(rng);
    }
  }
  return argmax_action(forward(params, state));
}

std::vector<double> td_targets(const NetParams& online, const NetParams& target,
                               const Eigen::MatrixXd& next_states, std::span<const double> rewards,
                               double gamma, bool double_q) {
  const auto batch = static_cast<std::size_t>(next_states.cols());
  if (batch == 0) throw ContractViolation("td targets over an empty batch");
  if (rewards.size() != batch) throw ContractViolation("rewards and next states differ in length");
  const Eigen::MatrixXd q_target = forward(target, next_states);
  Eigen::MatrixXd q_select;
  if (double_q) q_select = forward(online, next_states);
  const Eigen::MatrixXd& selector = double_q ? q_select : q_target;

  std::vector<double> y(batch);
  for (std::size_t j = 0; j < batch; ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < kNumActions; ++a) {
      if (selector(a, col) > selector(best, col)) best = a;
    }
    y[j] = rewards[j] + gamma * q_target(best, col);
  }
  return y;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : slots_(capacity) {
  if (capacity == 0) throw ContractViolation("replay capacity must be >= 1");
}

void ReplayMemory::push(Experience experience) {
  slots_[head_] = std::move(experience);
  head_ = (head_ + 1) % slots_.size();
  size_ = std::min(size_ + 1, slots_.size());
}

const Experience& ReplayMemory::at(std::size_t i) const {
  if (i >= size_) throw ContractViolation("replay index out of range");
  const std::size_t oldest = size_ < slots_.size() ? 0 : head_;
  return slots_[(oldest + i) % slots_.size()];
}

std::vector<std::size_t> ReplayMemory::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
  if (batch > size_)
    throw ContractViolation("cannot sample " + std::to_string(batch) + " from " +
                            std::to_string(size_) + " stored experiences");
  // Rejection sampling keeps draws distinct; the batch is small relative to
  // the memory in practice.
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  std::vector<std::size_t> chosen;
  chosen.reserve(batch);
  while (chosen.size() < batch) {
    const std::size_t i = pick(rng);
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
  }
  return chosen;
}

std::vector<const Experience*> ReplayMemory::sample(std::size_t batch, std::mt19937_64& rng) const {
  std::vector<const Experience*> out;
  for (std::size_t i : sample_indices(batch, rng)) out.push_back(&at(i));
  return out;
}

TrainResult train(const ScenarioSeries& series, Scheme scheme, const MicrogridConfig& env_cfg,
                  const AgentConfig& agent_cfg, int episodes, std::uint64_t seed,
                  const std::optional<Scaler>& scaler, const TrainHooks& hooks) {
  env_cfg.validate();
  agent_cfg.validate();
  if (episodes < 0) throw ConfigError("episodes", "must be >= 0");
  const auto episode_len = static_cast<std::size_t>(agent_cfg.episode_len);
  const auto horizon = static_cast<std::size_t>(agent_cfg.horizon);
  // The last transition needs one extra state to bootstrap from.
  try {
    (void)episode_window_range(series.size(), episode_len + 1, horizon, scheme);
  } catch (const ContractViolation& e) {
    throw ConfigError("data", e.what());
  }

  std::mt19937_64 rng(seed);
  const int dim = static_cast<int>(state_dim(scheme, agent_cfg.horizon));
  TrainResult result;
  result.scaler = scaler ? *scaler : fit_scaler(series);
  result.online = init_params(dim, agent_cfg.net_architecture(), rng());
  result.target = result.online;
  AdamState adam = AdamState::for_params(result.online);
  ReplayMemory memory(static_cast<std::size_t>(agent_cfg.replay_capacity));
  const auto batch = static_cast<std::size_t>(agent_cfg.batch);

  Eigen::MatrixXd states(dim, agent_cfg.batch);
  Eigen::MatrixXd next_states(dim, agent_cfg.batch);
  std::vector<int> actions(batch);
  std::vector<double> rewards(batch);
  std::vector<double> state, next_state;

  std::int64_t global_step = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    EpisodeRecord record;
    record.episode = ep;
    BatteryState soc = reset(env_cfg, rng);
    record.initial_soc = soc.soc_kwh;
    record.window_start = sample_episode_window(series, episode_len + 1, horizon, scheme, rng);

    double loss_sum = 0.0;
    int loss_count = 0;
    build_state_into(series, record.window_start, soc, scheme, agent_cfg.horizon, result.scaler,
                     env_cfg, state);
    for (std::size_t k = 0; k < episode_len; ++k) {
      const std::size_t t = record.window_start + k;
      const double epsilon = epsilon_at(global_step, agent_cfg);
      record.epsilon = epsilon;
      const int action = select_action(result.online, state, epsilon, rng);
      const StepOutcome out =
          step(soc, Action::from_index(action), step_inputs(series, t, result.scaler), env_cfg);
      record.reward += out.reward;
      soc = out.next_soc;
      build_state_into(series, t + 1, soc, scheme, agent_cfg.horizon, result.scaler, env_cfg,
                       next_state);
      memory.push(Experience{state, action, out.reward * agent_cfg.reward_scale, next_state});
      std::swap(state, next_state);

      if (memory.size() >= batch) {
        const auto sampled = memory.sample(batch, rng);
        for (std::size_t j = 0; j < batch; ++j) {
          const auto col = static_cast<Eigen::Index>(j);
          const Experience& e = *sampled[j];
          states.col(col) = Eigen::Map<const Eigen::VectorXd>(e.state.data(), dim);
          next_states.col(col) = Eigen::Map<const Eigen::VectorXd>(e.next_state.data(), dim);
          actions[j] = e.action;
          rewards[j] = e.reward;
        }
        const std::vector<double> targets = td_targets(result.online, result.target, next_states,
                                                       rewards, agent_cfg.gamma, agent_cfg.double_q);
        const LossAndGrad lg = loss_and_grad(result.online, states, actions, targets);
        adam_step(result.online, adam, lg.grad, agent_cfg.lr);
        loss_sum += lg.loss;
        ++loss_count;
      }

      ++global_step;
      if (global_step % agent_cfg.target_period == 0) {
        if (agent_cfg.update == UpdateRule::kSoft) {
          soft_update(result.target, result.online, agent_cfg.tau);
        } else {
          hard_update(result.target, result.online);
        }
        if (hooks.on_target_sync) hooks.on_target_sync(global_step);
      }
      if (hooks.on_step) hooks.on_step(global_step, result.target);
    }
    record.loss_mean = loss_count > 0 ? loss_sum / loss_count : std::numeric_limits<double>::quiet_NaN();
    result.trace.push_back(record);
    if (hooks.on_episode) hooks.on_episode(record);
  }
  result.steps = global_step;
  return result;
}

}  // namespace microgrid
