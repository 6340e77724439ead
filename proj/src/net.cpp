#include "microgrid/net.hpp"

#include <cmath>
#include <random>
#include <string>

#include "microgrid/errors.hpp"

namespace microgrid {

namespace {

struct StreamSpan {
  StreamKind kind;
  std::size_t begin;
  std::size_t end;
};

std::vector<StreamSpan> streams_of(const NetParams& params) {
  std::vector<StreamSpan> spans;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    if (spans.empty() || spans.back().kind != params.layers[i].stream) {
      spans.push_back({params.layers[i].stream, i, i + 1});
    } else {
      spans.back().end = i + 1;
    }
  }
  return spans;
}

// Activations of one stream: acts[0] is the input, pre[k] the linear output
// of layer k. The final layer is linear.
struct StreamCache {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> acts;
};

const Eigen::MatrixXd& run_stream(const NetParams& params, const StreamSpan& span,
                                  const Eigen::MatrixXd& input, StreamCache* cache,
                                  Eigen::MatrixXd& scratch_a, Eigen::MatrixXd& scratch_b) {
  const Eigen::MatrixXd* current = &input;
  Eigen::MatrixXd* out = &scratch_a;
  for (std::size_t l = span.begin; l < span.end; ++l) {
    out->resize(params.layers[l].out, input.cols());
    out->noalias() = params.weight(l) * (*current);
    out->colwise() += params.bias(l);
    const bool last = l + 1 == span.end;
    if (cache) cache->pre.push_back(*out);
    if (!last) out->array() = out->array().max(0.0);
    if (cache && !last) cache->acts.push_back(*out);
    current = out;
    out = out == &scratch_a ? &scratch_b : &scratch_a;
  }
  return *current;
}

void check_input(const NetParams& params, Eigen::Index rows) {
  if (rows != params.input_dim)
    throw ContractViolation("state dimension " + std::to_string(rows) +
                            " does not match network input " + std::to_string(params.input_dim));
}

void check_layout(const NetParams& a, const NetParams& b) {
  if (!same_layout(a, b)) throw ContractViolation("network parameter shapes differ");
}

}  // namespace

NetParams make_params(int input_dim, const NetArchitecture& arch) {
  if (input_dim < 1) throw ContractViolation("input dimension must be >= 1");
  if (arch.hidden_layers < 1 || arch.hidden_units < 1)
    throw ContractViolation("network needs at least one hidden layer with one unit");
  NetParams p;
  p.input_dim = input_dim;
  p.arch = arch;
  std::size_t offset = 0;
  const auto add_stream = [&](StreamKind kind, int head) {
    int in = input_dim;
    for (int l = 0; l <= arch.hidden_layers; ++l) {
      const int out = l == arch.hidden_layers ? head : arch.hidden_units;
      LayerShape s{kind, in, out, offset, offset + static_cast<std::size_t>(in) * out};
      offset = s.bias_offset + static_cast<std::size_t>(out);
      p.layers.push_back(s);
      in = out;
    }
  };
  if (arch.dueling) {
    add_stream(StreamKind::kValue, 1);
    add_stream(StreamKind::kAdvantage, kNumActions);
  } else {
    add_stream(StreamKind::kQ, kNumActions);
  }
  p.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
  return p;
}

NetParams init_params(int input_dim, const NetArchitecture& arch, std::uint64_t seed) {
  NetParams p = make_params(input_dim, arch);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const double stddev = std::sqrt(2.0 / p.layers[l].in);
    auto w = p.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = stddev * unit(rng);
  }
  return p;
}

bool same_layout(const NetParams& a, const NetParams& b) {
  if (a.input_dim != b.input_dim || a.layers.size() != b.layers.size() ||
      a.values.size() != b.values.size())
    return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.stream != y.stream || x.in != y.in || x.out != y.out ||
        x.weight_offset != y.weight_offset || x.bias_offset != y.bias_offset)
      return false;
  }
  return true;
}

Eigen::MatrixXd combine_dueling(const Eigen::RowVectorXd& value, const Eigen::MatrixXd& advantage) {
  Eigen::MatrixXd q = advantage;
  const Eigen::RowVectorXd shift = value - advantage.colwise().mean();
  q.rowwise() += shift;
  return q;
}

DuelingHeads forward_heads(const NetParams& params, const Eigen::MatrixXd& states) {
  if (!params.arch.dueling) throw ContractViolation("network has no dueling heads");
  check_input(params, states.rows());
  Eigen::MatrixXd a, b;
  DuelingHeads heads;
  for (const auto& span : streams_of(params)) {
    const Eigen::MatrixXd& out = run_stream(params, span, states, nullptr, a, b);
    if (span.kind == StreamKind::kValue) {
      heads.value = out.row(0);
    } else {
      heads.advantage = out;
    }
  }
  return heads;
}

Eigen::MatrixXd forward(const NetParams& params, const Eigen::MatrixXd& states) {
  check_input(params, states.rows());
  if (params.arch.dueling) {
    DuelingHeads heads = forward_heads(params, states);
    return combine_dueling(heads.value, heads.advantage);
  }
  Eigen::MatrixXd a, b;
  return run_stream(params, streams_of(params).front(), states, nullptr, a, b);
}

std::array<double, kNumActions> forward(const NetParams& params, std::span<const double> state) {
  const Eigen::Map<const Eigen::MatrixXd> column(state.data(), static_cast<Eigen::Index>(state.size()), 1);
  const Eigen::MatrixXd q = forward(params, Eigen::MatrixXd(column));
  std::array<double, kNumActions> out{};
  for (int i = 0; i < kNumActions; ++i) out[static_cast<std::size_t>(i)] = q(i, 0);
  return out;
}

LossAndGrad loss_and_grad(const NetParams& params, const Eigen::MatrixXd& states,
                          std::span<const int> actions, std::span<const double> targets) {
  const Eigen::Index batch = states.cols();
  if (batch == 0) throw ContractViolation("loss over an empty batch");
  if (static_cast<std::size_t>(batch) != actions.size() ||
      static_cast<std::size_t>(batch) != targets.size())
    throw ContractViolation("batch columns, actions and targets differ in length");
  check_input(params, states.rows());

  const auto spans = streams_of(params);
  std::vector<StreamCache> caches(spans.size());
  Eigen::MatrixXd a, b;
  Eigen::RowVectorXd value;
  Eigen::MatrixXd q;
  for (std::size_t s = 0; s < spans.size(); ++s) {
    caches[s].acts.push_back(states);
    const Eigen::MatrixXd& out = run_stream(params, spans[s], states, &caches[s], a, b);
    if (spans[s].kind == StreamKind::kValue) {
      value = out.row(0);
    } else {
      q = out;
    }
  }
  if (params.arch.dueling) q = combine_dueling(value, q);

  // dL/dQ is nonzero only at the taken action.
  LossAndGrad result;
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(kNumActions, batch);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int act = actions[static_cast<std::size_t>(j)];
    if (act < 0 || act >= kNumActions) throw ContractViolation("action index out of range");
    const double err = targets[static_cast<std::size_t>(j)] - q(act, j);
    loss += err * err;
    dq(act, j) = -2.0 * err / static_cast<double>(batch);
  }
  result.loss = loss / static_cast<double>(batch);
  result.grad = Eigen::VectorXd::Zero(params.values.size());

  for (std::size_t s = 0; s < spans.size(); ++s) {
    Eigen::MatrixXd delta;
    switch (spans[s].kind) {
      case StreamKind::kQ: delta = dq; break;
      case StreamKind::kValue: delta = dq.colwise().sum(); break;
      case StreamKind::kAdvantage: {
        const Eigen::RowVectorXd mean = dq.colwise().sum() / static_cast<double>(kNumActions);
        delta = dq;
        delta.rowwise() -= mean;
        break;
      }
    }
    const StreamCache& cache = caches[s];
    for (std::size_t l = spans[s].end; l-- > spans[s].begin;) {
      const std::size_t k = l - spans[s].begin;
      const LayerShape& shape = params.layers[l];
      Eigen::Map<Eigen::MatrixXd> gw(result.grad.data() + shape.weight_offset, shape.out, shape.in);
      Eigen::Map<Eigen::VectorXd> gb(result.grad.data() + shape.bias_offset, shape.out);
      gw.noalias() = delta * cache.acts[k].transpose();
      gb = delta.rowwise().sum();
      if (l == spans[s].begin) break;
      Eigen::MatrixXd upstream = params.weight(l).transpose() * delta;
      delta = (cache.pre[k - 1].array() > 0.0).select(upstream, 0.0);
    }
  }
  return result;
}

AdamState AdamState::for_params(const NetParams& params) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(params.values.size());
  s.v = Eigen::VectorXd::Zero(params.values.size());
  return s;
}

void adam_step(NetParams& params, AdamState& state, const Eigen::VectorXd& grad, double lr,
               const AdamHyper& hyper) {
  if (grad.size() != params.values.size() || state.m.size() != params.values.size() ||
      state.v.size() != params.values.size())
    throw ContractViolation("Adam state or gradient shape does not match parameters");
  ++state.step;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  params.values.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + hyper.eps);
}

void soft_update(NetParams& target, const NetParams& online, double tau) {
  check_layout(target, online);
  if (!(tau > 0.0 && tau <= 1.0)) throw ContractViolation("tau must lie in (0, 1]");
  if (tau == 1.0) {
    target.values = online.values;
    return;
  }
  target.values = (1.0 - tau) * target.values + tau * online.values;
}

void hard_update(NetParams& target, const NetParams& online) {
  check_layout(target, online);
  target.values = online.values;
}

}  // namespace microgrid
