#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "microgrid/env.hpp"

namespace microgrid {

struct NetArchitecture {
  bool dueling = true;
  int hidden_layers = 3;
  int hidden_units = 64;
};

// Stream ids. A dueling net has a value stream and an advantage stream, both
// fed directly from the input; a plain net has a single Q stream.
enum class StreamKind { kValue, kAdvantage, kQ };

struct LayerShape {
  StreamKind stream = StreamKind::kQ;
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;  // column-major out x in block
  std::size_t bias_offset = 0;
};

// All weights live in one contiguous vector; layers are views into it.
struct NetParams {
  int input_dim = 0;
  NetArchitecture arch;
  std::vector<LayerShape> layers;  // grouped by stream, input side first
  Eigen::VectorXd values;

  std::size_t num_params() const { return static_cast<std::size_t>(values.size()); }

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const {
    const LayerShape& s = layers[layer];
    return {values.data() + s.weight_offset, s.out, s.in};
  }
  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer) {
    const LayerShape& s = layers[layer];
    return {values.data() + s.weight_offset, s.out, s.in};
  }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const {
    const LayerShape& s = layers[layer];
    return {values.data() + s.bias_offset, s.out};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer) {
    const LayerShape& s = layers[layer];
    return {values.data() + s.bias_offset, s.out};
  }
};

// Zero-valued parameters with the layout for `arch`.
NetParams make_params(int input_dim, const NetArchitecture& arch);

// He-normal weights, zero biases.
NetParams init_params(int input_dim, const NetArchitecture& arch, std::uint64_t seed);

bool same_layout(const NetParams& a, const NetParams& b);

// Batched forward pass; `states` holds one state per column. Returns a
// kNumActions x batch matrix of Q values.
Eigen::MatrixXd forward(const NetParams& params, const Eigen::MatrixXd& states);
std::array<double, kNumActions> forward(const NetParams& params, std::span<const double> state);

// Raw stream outputs of a dueling net, before they are combined.
struct DuelingHeads {
  Eigen::RowVectorXd value;
  Eigen::MatrixXd advantage;
};
DuelingHeads forward_heads(const NetParams& params, const Eigen::MatrixXd& states);

// Q = V + A - mean(A), column by column.
Eigen::MatrixXd combine_dueling(const Eigen::RowVectorXd& value, const Eigen::MatrixXd& advantage);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;  // same layout as NetParams::values
};

// Mean squared TD error over the batch; targets are constants.
LossAndGrad loss_and_grad(const NetParams& params, const Eigen::MatrixXd& states,
                          std::span<const int> actions, std::span<const double> targets);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step = 0;

  static AdamState for_params(const NetParams& params);
};

void adam_step(NetParams& params, AdamState& state, const Eigen::VectorXd& grad, double lr,
               const AdamHyper& hyper = {});

// target <- (1 - tau) * target + tau * online
void soft_update(NetParams& target, const NetParams& online, double tau);
void hard_update(NetParams& target, const NetParams& online);

}  // namespace microgrid
