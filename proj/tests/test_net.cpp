#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "microgrid/errors.hpp"
#include "microgrid/net.hpp"
#include "oracles.hpp"

using namespace microgrid;

namespace {

Eigen::MatrixXd random_states(int dim, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(dim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dim; ++i) m(i, j) = u(rng);
  return m;
}

std::vector<double> column(const Eigen::MatrixXd& m, int j) {
  return std::vector<double>(m.col(j).data(), m.col(j).data() + m.rows());
}

// init_params zeroes biases; a random net for gradient checks gets random
// biases too so no pre-activation sits exactly on the ReLU kink.
NetParams random_net(int input_dim, const NetArchitecture& arch, std::uint64_t seed) {
  auto p = init_params(input_dim, arch, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> nd(0.0, 0.3);
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    for (Eigen::Index i = 0; i < p.bias(l).size(); ++i) p.bias(l)[i] = nd(rng);
  return p;
}

double max_rel_error(const Eigen::VectorXd& a, const std::vector<double>& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double x = a[static_cast<Eigen::Index>(i)];
    const double denom = std::max({std::fabs(x), std::fabs(f[i]), 1e-6});
    worst = std::max(worst, std::fabs(x - f[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST(Layout, DuelingHasTwoStreams) {
  const auto d = make_params(8, {true, 3, 64});
  int v = 0, a = 0, q = 0;
  for (const auto& l : d.layers) {
    v += l.stream == StreamKind::kValue;
    a += l.stream == StreamKind::kAdvantage;
    q += l.stream == StreamKind::kQ;
  }
  EXPECT_EQ(v, 4);
  EXPECT_EQ(a, 4);
  EXPECT_EQ(q, 0);
  const auto p = make_params(8, {false, 3, 64});
  EXPECT_EQ(p.layers.size(), 4u);
  EXPECT_EQ(p.layers.back().out, 5);
  const std::size_t stream = 8 * 64 + 64 + 2 * (64 * 64 + 64);
  EXPECT_EQ(p.num_params(), stream + 64 * 5 + 5);
  EXPECT_EQ(d.num_params(), 2 * stream + 64 + 1 + 64 * 5 + 5);
}

TEST(Init, DeterministicHeScaledZeroBias) {
  const auto a = init_params(76, {}, 3), b = init_params(76, {}, 3), c = init_params(76, {}, 4);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    EXPECT_TRUE((a.bias(l).array() == 0.0).all());
    const auto w = a.weight(l);
    const double var = w.array().square().mean();
    const double he = 2.0 / a.layers[l].in;
    EXPECT_NEAR(var, he, 0.35 * he) << "layer " << l;
  }
}

TEST(Init, OutputsOrderOne) {
  std::mt19937_64 rng(8);
  const auto p = init_params(76, {}, 1);
  const auto x = random_states(76, 1000, rng);
  const double rms = std::sqrt(forward(p, x).array().square().mean());
  EXPECT_GT(rms, 0.05);
  EXPECT_LT(rms, 10.0);
}

TEST(Forward, MatchesScalarReference) {
  std::mt19937_64 rng(2);
  for (bool dueling : {true, false}) {
    const auto p = init_params(10, {dueling, 3, 16}, 5);
    const auto x = random_states(10, 20, rng);
    const auto q = forward(p, x);
    for (int j = 0; j < 20; ++j) {
      const auto ref = oracle::q_values(p, column(x, j));
      const auto single = forward(p, std::span<const double>(x.col(j).data(), 10));
      for (int a = 0; a < 5; ++a) {
        EXPECT_NEAR(q(a, j), ref[static_cast<std::size_t>(a)], 1e-12);
        EXPECT_NEAR(single[static_cast<std::size_t>(a)], q(a, j), 1e-12);
      }
    }
  }
}

TEST(Forward, PureAndRejectsWrongShape) {
  std::mt19937_64 rng(2);
  const auto p = init_params(6, {}, 5);
  const auto x = random_states(6, 4, rng);
  EXPECT_EQ(forward(p, x), forward(p, x));
  EXPECT_THROW(forward(p, random_states(7, 4, rng)), ContractViolation);
}

TEST(Dueling, CombineExamples) {
  Eigen::RowVectorXd v(1);
  v << 1.0;
  Eigen::MatrixXd a(5, 1);
  a << 1, 2, 3, 4, 5;
  const auto q = combine_dueling(v, a);
  const double want[] = {-1, 0, 1, 2, 3};
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(q(i, 0), want[i]);
  a.setConstant(7.5);
  const auto flat = combine_dueling(v, a);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(flat(i, 0), 1.0);
}

TEST(Dueling, MeanOfQEqualsValue) {
  std::mt19937_64 rng(6);
  const auto p = init_params(76, {}, 9);
  const auto x = random_states(76, 1000, rng);
  const auto heads = forward_heads(p, x);
  const auto q = forward(p, x);
  for (int j = 0; j < 1000; ++j) EXPECT_NEAR(q.col(j).mean(), heads.value(j), 1e-6);
}

TEST(Loss, PerfectFitAndSingleItem) {
  std::mt19937_64 rng(1);
  const auto p = init_params(8, {}, 2);
  const auto x = random_states(8, 3, rng);
  const auto q = forward(p, x);
  const std::vector<int> acts = {0, 3, 4};
  std::vector<double> tg = {q(0, 0), q(3, 1), q(4, 2)};
  const auto fit = loss_and_grad(p, x, acts, tg);
  EXPECT_EQ(fit.loss, 0.0);
  EXPECT_EQ(fit.grad.cwiseAbs().maxCoeff(), 0.0);

  const auto x1 = random_states(8, 1, rng);
  const double q1 = forward(p, x1)(2, 0);
  const std::vector<int> a1 = {2};
  const std::vector<double> t1 = {q1 + 2.0};
  EXPECT_NEAR(loss_and_grad(p, x1, a1, t1).loss, 4.0, 1e-12);
  EXPECT_THROW(loss_and_grad(p, Eigen::MatrixXd(8, 0), {}, {}), ContractViolation);
}

TEST(Loss, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> act(0, 4), layers(1, 3), units(3, 12), batch(1, 6);
  std::normal_distribution<double> target(0.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const NetArchitecture arch{trial % 2 == 0, layers(rng), units(rng)};
    const auto p = random_net(8, arch, 100 + trial);
    const int b = batch(rng);
    const auto x = random_states(8, b, rng);
    std::vector<std::vector<double>> xs;
    std::vector<int> acts;
    std::vector<double> tg;
    for (int j = 0; j < b; ++j) {
      xs.push_back(column(x, j));
      acts.push_back(act(rng));
      tg.push_back(target(rng));
    }
    const auto lg = loss_and_grad(p, x, acts, tg);
    EXPECT_NEAR(lg.loss, oracle::mse(p, xs, acts, tg), 1e-12);
    worst = std::max(worst, max_rel_error(lg.grad, oracle::central_difference(p, xs, acts, tg, 1e-5)));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = make_params(1, {false, 1, 1});
  p.values.setConstant(0.5);
  auto st = AdamState::for_params(p);
  Eigen::VectorXd g = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p.num_params()));
  const auto before = p.values;
  adam_step(p, st, g, 0.0003);
  for (Eigen::Index i = 0; i < before.size(); ++i)
    EXPECT_NEAR(p.values[i] - before[i], -0.0003, 1e-10);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroGradientAndDeterminism) {
  auto p = init_params(4, {}, 1);
  auto st = AdamState::for_params(p);
  const auto before = p.values;
  adam_step(p, st, Eigen::VectorXd::Zero(before.size()), 0.0003);
  EXPECT_EQ(p.values, before);

  auto p1 = init_params(4, {}, 1), p2 = p1;
  auto s1 = AdamState::for_params(p1), s2 = s1;
  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(before.size(), -1.0, 1.0);
  adam_step(p1, s1, g, 0.001);
  adam_step(p2, s2, g, 0.001);
  EXPECT_EQ(p1.values, p2.values);
  EXPECT_THROW(adam_step(p1, s1, Eigen::VectorXd::Zero(3), 0.001), ContractViolation);
}

TEST(Adam, MatchesScalarReference) {
  auto p = init_params(3, {false, 1, 2}, 4);
  auto st = AdamState::for_params(p);
  const auto n = p.values.size();
  std::vector<double> w(p.values.data(), p.values.data() + n), m(n, 0.0), v(n, 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int t = 1; t <= 5; ++t) {
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g[i] = nd(rng);
    adam_step(p, st, g, 0.01);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      m[k] = 0.9 * m[k] + 0.1 * g[i];
      v[k] = 0.999 * v[k] + 0.001 * g[i] * g[i];
      const double mh = m[k] / (1.0 - std::pow(0.9, t));
      const double vh = v[k] / (1.0 - std::pow(0.999, t));
      w[k] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) EXPECT_NEAR(p.values[i], w[static_cast<std::size_t>(i)], 1e-14);
}

TEST(SoftUpdate, ElementwiseExact) {
  auto target = init_params(5, {}, 1);
  const auto online = init_params(5, {}, 2);
  const auto before = target.values;
  soft_update(target, online, 0.01);
  for (Eigen::Index i = 0; i < before.size(); ++i)
    EXPECT_EQ(target.values[i], (1.0 - 0.01) * before[i] + 0.01 * online.values[i]);

  auto z = make_params(2, {false, 1, 1});
  auto one = z;
  one.values.setOnes();
  soft_update(z, one, 0.01);
  EXPECT_TRUE((z.values.array() == 0.01).all());
}

TEST(SoftUpdate, GeometricConvergence) {
  auto target = init_params(3, {false, 1, 2}, 1);
  const auto online = init_params(3, {false, 1, 2}, 2);
  const auto w0 = target.values;
  const double tau = 0.1;
  for (int n = 1; n <= 50; ++n) {
    soft_update(target, online, tau);
    for (Eigen::Index i = 0; i < w0.size(); ++i)
      EXPECT_NEAR(target.values[i], online.values[i] + std::pow(1.0 - tau, n) * (w0[i] - online.values[i]),
                  1e-12);
  }
}

TEST(HardUpdate, CopiesAndEqualsTauOne) {
  auto t1 = init_params(5, {}, 1), t2 = t1;
  auto online = init_params(5, {}, 2);
  hard_update(t1, online);
  soft_update(t2, online, 1.0);
  EXPECT_EQ(t1.values, online.values);
  EXPECT_EQ(t2.values, online.values);
  online.values.array() += 1.0;
  EXPECT_NE(t1.values, online.values);

  auto other = init_params(6, {}, 1);
  EXPECT_THROW(hard_update(other, online), ContractViolation);
  EXPECT_THROW(soft_update(other, online, 0.5), ContractViolation);
  EXPECT_THROW(soft_update(t1, online, 0.0), ContractViolation);
  EXPECT_THROW(soft_update(t1, online, 1.5), ContractViolation);
}
