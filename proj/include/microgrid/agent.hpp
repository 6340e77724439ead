#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "microgrid/data.hpp"
#include "microgrid/env.hpp"
#include "microgrid/net.hpp"
#include "microgrid/schemes.hpp"

namespace microgrid {

enum class UpdateRule { kSoft, kHard };

std::string to_string(UpdateRule rule);
UpdateRule parse_update_rule(const std::string& text);

// Named learner variants: vanilla DQN, double DQN, dueling DQN and the
// double dueling combination.
enum class Architecture { kDqn, kDdqn, kDueling, kD3qn };

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);
Architecture architecture_of(bool double_q, bool dueling);

struct AgentConfig {
  double gamma = 0.99;
  double lr = 0.0003;
  int batch = 64;
  double tau = 0.01;
  int target_period = 24;  // M
  int episode_len = 168;   // K
  int horizon = 24;        // T
  double epsilon_start = 0.3;
  double epsilon_decay = 0.999;
  double epsilon_floor = 0.01;
  bool double_q = true;
  bool dueling = true;
  UpdateRule update = UpdateRule::kSoft;
  int replay_capacity = 10000;
  int hidden_layers = 3;
  int hidden_units = 64;
  // Multiplies rewards before they enter TD targets. Traces always report
  // unscaled rewards.
  double reward_scale = 1.0;

  Architecture architecture() const { return architecture_of(double_q, dueling); }
  void set_architecture(Architecture arch);
  NetArchitecture net_architecture() const;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Per-step exponential decay: max(floor, start * decay^step).
double epsilon_at(std::int64_t global_step, const AgentConfig& cfg);

// Greedy index with ties broken toward the lowest index.
int argmax_action(const std::array<double, kNumActions>& q);

int select_action(const NetParams& params, std::span<const double> state, double epsilon,
                  std::mt19937_64& rng);

// y = R + gamma * Q_target(s', a*) where a* is chosen by the online net
// (double) or the target net itself (vanilla). No terminal masking.
std::vector<double> td_targets(const NetParams& online, const NetParams& target,
                               const Eigen::MatrixXd& next_states, std::span<const double> rewards,
                               double gamma, bool double_q);

struct Experience {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
};

// Bounded FIFO of experiences; the oldest entry is overwritten first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Experience experience);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return slots_.size(); }

  // Index 0 is the oldest stored experience.
  const Experience& at(std::size_t i) const;

  // Uniform sample of `batch` distinct entries (by at() index). Throws
  // ContractViolation if fewer than `batch` are stored.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;
  std::vector<const Experience*> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::vector<Experience> slots_;
  std::size_t head_ = 0;  // next write position
  std::size_t size_ = 0;
};

struct EpisodeRecord {
  int episode = 0;
  std::size_t window_start = 0;
  double initial_soc = 0.0;
  double reward = 0.0;   // undiscounted sum over the episode
  double epsilon = 0.0;  // last epsilon used in the episode
  double loss_mean = 0.0;  // NaN when no gradient step ran
};

struct TrainResult {
  NetParams online;
  NetParams target;
  Scaler scaler;
  std::vector<EpisodeRecord> trace;
  std::int64_t steps = 0;
};

struct TrainHooks {
  // Called after every target synchronisation with the global step.
  std::function<void(std::int64_t step)> on_target_sync;
  std::function<void(const EpisodeRecord&)> on_episode;
  // Called after every environment step (and any target sync) with the
  // global step count and the current target network.
  std::function<void(std::int64_t step, const NetParams& target)> on_step;
};

// Episodic training loop. Each episode resets SOC uniformly, samples a
// K-step window (plus one bootstrap step), and takes one gradient step per
// environment step once the replay holds a full batch. The target network is
// synchronised every `target_period` global steps. One RNG stream seeded by
// `seed` drives all randomness.
TrainResult train(const ScenarioSeries& series, Scheme scheme, const MicrogridConfig& env_cfg,
                  const AgentConfig& agent_cfg, int episodes, std::uint64_t seed,
                  const std::optional<Scaler>& scaler = std::nullopt, const TrainHooks& hooks = {});

}  // namespace microgrid
