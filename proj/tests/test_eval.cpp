#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "microgrid/errors.hpp"
#include "microgrid/eval.hpp"
#include "oracles.hpp"

using namespace microgrid;

namespace {

ScenarioSeries flat_series(std::size_t n, double price, double ci, double unmet) {
  ScenarioSeries s;
  for (std::size_t i = 0; i < n; ++i)
    s.records.push_back(make_record(static_cast<std::int64_t>(i), price, ci, std::max(unmet, 0.0),
                                    std::max(-unmet, 0.0)));
  return s;
}

Scaler fixed_scaler() { return {MinMax{0.0, 1.0}, MinMax{0.0, 1000.0}}; }

AgentConfig tiny_agent(int horizon) {
  AgentConfig a;
  a.hidden_layers = 1;
  a.hidden_units = 8;
  a.batch = 8;
  a.episode_len = 24;
  a.horizon = horizon;
  a.replay_capacity = 200;
  return a;
}

}  // namespace

TEST(Rollout, ZeroNetPicksMaxCharge) {
  const auto s = generate_synthetic(3, 2);
  Checkpoint c;
  c.params = make_params(static_cast<int>(state_dim(Scheme::kPredictionFree, 24)), {});
  c.scheme = Scheme::kPredictionFree;
  c.scaler = fit_scaler(s);
  const auto rep = rollout(c, s, nullptr, {500.0});
  ASSERT_FALSE(rep.trace.empty());
  for (const auto& st : rep.trace) EXPECT_EQ(st.action, 0);
  EXPECT_EQ(rep.trace.front().t, 24u);
  EXPECT_EQ(rep.trace.back().t, s.size() - 1);
}

TEST(Rollout, OneStepIdleIsZero) {
  const auto s = flat_series(1, 0.3, 300, 1000);
  RolloutSpec spec;
  spec.scaler = fixed_scaler();
  const auto rep = rollout(constant_policy(2), s, nullptr, spec);
  ASSERT_EQ(rep.trace.size(), 1u);
  EXPECT_EQ(rep.cumulative_reward, 0.0);
  EXPECT_EQ(rep.peak_violation_hours, 0);
}

TEST(Rollout, TotalsMatchIndependentResummation) {
  const auto s = generate_synthetic(7, 3);
  RolloutSpec spec;
  spec.scaler = fit_scaler(s);
  const auto rep = rollout(uniform_random_policy(4), s, nullptr, spec);
  oracle::Physics p;
  double total = 0.0, market = 0.0, carbon = 0.0, peak = 0.0, deg = 0.0;
  int violations = 0;
  double soc = 500.0;
  for (const auto& st : rep.trace) {
    EXPECT_EQ(st.soc_before, soc);
    const double pr = std::clamp(spec.scaler.price.scale(s[st.t].price), 0.0, 1.0);
    const double ci = std::clamp(spec.scaler.carbon.scale(s[st.t].carbon_intensity), 0.0, 1.0);
    const double pb = oracle::feasible_power(kActionLevels[static_cast<std::size_t>(st.action)], soc, p);
    const auto r = oracle::reward(pr, ci, pb, s[st.t].unmet_kw, p);
    EXPECT_NEAR(st.reward, r.total, 1e-9);
    EXPECT_NEAR(st.components.market, r.market, 1e-9);
    EXPECT_NEAR(st.components.carbon, r.carbon, 1e-9);
    EXPECT_NEAR(st.components.peak_penalty, r.peak, 1e-9);
    EXPECT_NEAR(st.components.degradation, r.degradation, 1e-9);
    total += r.total;
    market += r.market;
    carbon += r.carbon;
    peak += r.peak;
    deg += r.degradation;
    violations += s[st.t].unmet_kw - pb > p.pmax;
    soc = oracle::next_soc(soc, pb, p);
  }
  EXPECT_NEAR(rep.cumulative_reward, total, 1e-9);
  EXPECT_NEAR(rep.component_totals.total(), rep.cumulative_reward, 1e-9);
  EXPECT_NEAR(rep.component_totals.market, market, 1e-9);
  EXPECT_NEAR(rep.component_totals.carbon, carbon, 1e-9);
  EXPECT_NEAR(rep.component_totals.peak_penalty, peak, 1e-9);
  EXPECT_NEAR(rep.component_totals.degradation, deg, 1e-9);
  EXPECT_EQ(rep.peak_violation_hours, violations);
}

TEST(Rollout, PbDecidesOnPredictionsButScoresActuals) {
  const auto actual = generate_synthetic(3, 5);
  const auto predicted = simulate_predictions(actual, {0.3, 1});
  std::vector<std::vector<double>> seen_pred, seen_act;
  RolloutSpec spec;
  spec.scheme = Scheme::kPredictionBased;
  spec.horizon = 4;
  spec.scaler = fit_scaler(actual);
  auto recorder = [](std::vector<std::vector<double>>& log) {
    return [&log](std::span<const double> s, std::size_t, BatteryState) {
      log.emplace_back(s.begin(), s.end());
      return 3;
    };
  };
  const auto a = rollout(recorder(seen_pred), actual, &predicted, spec);
  const auto b = rollout(recorder(seen_act), actual, nullptr, spec);
  EXPECT_NE(seen_pred, seen_act);
  EXPECT_EQ(a.cumulative_reward, b.cumulative_reward);
  spec.scheme = Scheme::kPredictionFree;
  seen_pred.clear();
  seen_act.clear();
  rollout(recorder(seen_pred), actual, &predicted, spec);
  rollout(recorder(seen_act), actual, nullptr, spec);
  EXPECT_EQ(seen_pred, seen_act);
}

TEST(Ranges, SharedAndFull) {
  const auto r = shared_range(24, 672);
  EXPECT_EQ(r.begin, 24u);
  EXPECT_EQ(r.end, 648u);
  EXPECT_THROW(shared_range(24, 48), ContractViolation);
  const auto pb = full_range(Scheme::kPredictionBased, 24, 672);
  EXPECT_EQ(pb.begin, 0u);
  EXPECT_EQ(pb.end, 648u);
}

TEST(Convergence, Examples) {
  std::vector<double> c(200, 3.5);
  auto st = convergence_stats(c, 100, 200);
  EXPECT_EQ(st.average, 3.5);
  EXPECT_EQ(st.variance, 0.0);
  std::vector<double> alt(400);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 == 0 ? 0.0 : 2.0;
  st = convergence_stats(alt, 100, 400, 50);
  EXPECT_NEAR(st.average, 1.0, 1e-12);
  EXPECT_GE(st.variance, 0.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<double> r(300);
  for (auto& x : r) x = nd(rng);
  EXPECT_GE(convergence_stats(r, 0, 300).variance, 0.0);
  EXPECT_THROW(convergence_stats(r, 100, 301), ContractViolation);
}

TEST(Convergence, MatchesDirectMovingAverage) {
  std::vector<double> tr(120);
  for (std::size_t i = 0; i < tr.size(); ++i) tr[i] = std::sin(0.3 * i) * i;
  const auto st = convergence_stats(tr, 60, 120, 10);
  double mean = 0.0;
  std::vector<double> ma;
  for (std::size_t i = 60; i < 120; ++i) {
    double s = 0.0;
    for (std::size_t j = i - 9; j <= i; ++j) s += tr[j];
    ma.push_back(s / 10.0);
    mean += s / 10.0;
  }
  mean /= 60.0;
  double var = 0.0;
  for (double m : ma) var += (m - mean) * (m - mean);
  var /= 60.0;
  EXPECT_NEAR(st.average, mean, 1e-9);
  EXPECT_NEAR(st.variance, var, 1e-9);
}

TEST(Exhaustive, HorizonOneIsGreedy) {
  const auto s = generate_synthetic(2, 1);
  const auto sc = fit_scaler(s);
  const MicrogridConfig cfg;
  for (std::size_t t = 0; t < 24; t += 5) {
    const auto r = exhaustive_oracle(s, t, 1, sc, cfg, {500.0});
    double best = -1e300;
    int arg = -1;
    for (int a = 0; a < 5; ++a) {
      const double v = step({500.0}, Action::from_index(a), step_inputs(s, t, sc), cfg).reward;
      if (v > best) best = v, arg = a;
    }
    EXPECT_EQ(r.reward, best);
    EXPECT_EQ(r.actions, std::vector<int>{arg});
  }
}

TEST(Exhaustive, AllZeroTiesPickIndexZero) {
  const auto s = flat_series(2, 0.0, 0.0, 1000);
  MicrogridConfig cfg;
  cfg.lambda = 0.0;
  const auto r = exhaustive_oracle(s, 0, 2, fixed_scaler(), cfg, {500.0});
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(r.actions, (std::vector<int>{0, 0}));
}

TEST(Exhaustive, CheapThenExpensiveChargesFirst) {
  ScenarioSeries s;
  s.records = {make_record(0, 0.0, 0, 1000, 0), make_record(1, 0.0, 0, 1000, 0),
               make_record(2, 1.0, 0, 1000, 0)};
  const MicrogridConfig cfg;
  const auto r = exhaustive_oracle(s, 0, 3, fixed_scaler(), cfg, {100.0});
  const auto idle = rollout(constant_policy(2), s, nullptr, RolloutSpec{Scheme::kCommon, 0, fixed_scaler(), cfg, {100.0}, {}});
  EXPECT_GT(r.reward, idle.cumulative_reward);
  EXPECT_LT(kActionLevels[static_cast<std::size_t>(r.actions.front())], 0.0);
  EXPECT_GT(kActionLevels[static_cast<std::size_t>(r.actions.back())], 0.0);
}

TEST(Exhaustive, DominatesOtherPolicies) {
  const auto s = generate_synthetic(2, 3);
  const auto sc = fit_scaler(s);
  const MicrogridConfig cfg;
  const auto best = exhaustive_oracle(s, 14, 5, sc, cfg, {400.0});
  RolloutSpec spec{Scheme::kCommon, 0, sc, cfg, {400.0}, StepRange{14, 19}};
  for (std::uint64_t seed = 0; seed < 30; ++seed)
    EXPECT_LE(rollout(uniform_random_policy(seed), s, nullptr, spec).cumulative_reward, best.reward + 1e-9);
  EXPECT_LE(rollout(myopic_policy(s, sc, cfg), s, nullptr, spec).cumulative_reward, best.reward + 1e-9);
  EXPECT_NEAR(rollout(sequence_policy(best.actions, 14), s, nullptr, spec).cumulative_reward, best.reward, 1e-9);
}

TEST(Exhaustive, Limits) {
  const auto s = generate_synthetic(1, 3);
  EXPECT_THROW(exhaustive_oracle(s, 0, 9, fit_scaler(s), {}, {500.0}), ContractViolation);
  EXPECT_THROW(exhaustive_oracle(s, 20, 8, fit_scaler(s), {}, {500.0}), ContractViolation);
}

TEST(Exhaustive, DiscountedVariant) {
  const auto s = generate_synthetic(1, 3);
  const auto sc = fit_scaler(s);
  const MicrogridConfig cfg;
  const auto r = exhaustive_oracle(s, 6, 3, sc, cfg, {500.0}, 0.5);
  double soc = 500.0, v = 0.0, d = 1.0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto o = step({soc}, Action::from_index(r.actions[k]), step_inputs(s, 6 + k, sc), cfg);
    v += d * o.reward;
    d *= 0.5;
    soc = o.next_soc.soc_kwh;
  }
  EXPECT_NEAR(r.reward, v, 1e-12);
}

TEST(Dp, AgreesWithExhaustiveOnReachableGrid) {
  const auto s = generate_synthetic(2, 9);
  const auto sc = fit_scaler(s);
  const MicrogridConfig cfg;
  for (int h = 1; h <= 4; ++h) {
    for (std::size_t start : {0u, 7u, 17u}) {
      const BatteryState soc{430.0};
      const auto ex = exhaustive_oracle(s, start, h, sc, cfg, soc);
      const auto dp = dp_oracle(s, start, static_cast<std::size_t>(h), sc, cfg, soc, reachable_socs(cfg, soc, h));
      EXPECT_NEAR(dp.dispatch_reward, ex.reward, 1e-9);
      EXPECT_EQ(dp.actions, ex.actions);
    }
  }
}

TEST(Dp, OneStepMatchesExhaustive) {
  const auto s = generate_synthetic(1, 9);
  const auto sc = fit_scaler(s);
  const auto dp = dp_oracle(s, 5, 1, sc, {}, {500.0}, 201);
  const auto ex = exhaustive_oracle(s, 5, 1, sc, {}, {500.0});
  EXPECT_EQ(dp.dispatch_reward, ex.reward);
}

TEST(Dp, DominatesMyopicAndIdleAndConverges) {
  const auto s = generate_synthetic(2, 1);
  const auto sc = fit_scaler(s);
  const MicrogridConfig cfg;
  const auto dp = dp_oracle(s, 0, 48, sc, cfg, {500.0}, 201);
  RolloutSpec spec{Scheme::kCommon, 0, sc, cfg, {500.0}, StepRange{0, 48}};
  EXPECT_GE(dp.dispatch_reward, rollout(myopic_policy(s, sc, cfg), s, nullptr, spec).cumulative_reward);
  EXPECT_GE(dp.dispatch_reward, rollout(constant_policy(2), s, nullptr, spec).cumulative_reward);
  EXPECT_NEAR(rollout(sequence_policy(dp.actions, 0), s, nullptr, spec).cumulative_reward, dp.dispatch_reward, 1e-9);
  const auto fine = dp_oracle(s, 0, 48, sc, cfg, {500.0}, 401);
  EXPECT_LT(std::fabs(fine.dispatch_reward - dp.dispatch_reward), 0.01 * std::fabs(dp.dispatch_reward));
  EXPECT_EQ(dp.value_at_start.size(), 201u);
  EXPECT_THROW(dp_oracle(s, 0, 48, sc, cfg, {500.0}, 1), ContractViolation);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), ContractViolation);
}

TEST(NoiseSweep, RowsAndInvariants) {
  const auto s = generate_synthetic(4, 2);
  const auto agent = tiny_agent(4);
  const auto pb = train(s, Scheme::kPredictionBased, {}, agent, 3, 1);
  const auto pf = train(s, Scheme::kPredictionFree, {}, agent, 3, 1);
  const Checkpoint pbc{pb.online, Scheme::kPredictionBased, 4, true, UpdateRule::kSoft, pb.scaler, {}};
  const Checkpoint pfc{pf.online, Scheme::kPredictionFree, 4, true, UpdateRule::kSoft, pf.scaler, {}};
  const std::vector<double> levels = {0.0, 0.05, 0.10, 0.125, 0.15};
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  const auto range = shared_range(4, s.size());
  const auto rows = noise_sweep(pbc, pfc, s, levels, seeds, {500.0}, range);
  ASSERT_EQ(rows.size(), levels.size());
  const double exact = rollout(pbc, s, nullptr, {500.0}, range).cumulative_reward;
  for (double r : rows[0].pb_rewards) EXPECT_EQ(r, exact);
  for (const auto& row : rows) {
    EXPECT_EQ(row.pf_reward, rows[0].pf_reward);
    EXPECT_EQ(row.pb_rewards.size(), 3u);
  }
}

TEST(Ablation, MeasuresNominalWeights) {
  const auto s = generate_synthetic(4, 2);
  const auto agent = tiny_agent(4);
  const MicrogridConfig cfg;
  const auto r = objective_ablation(s, Scheme::kPredictionFree, cfg, agent, 3, 5,
                                    Objective::kDegradation, {500.0});
  EXPECT_EQ(r.ablated_model.env.lambda, 0.0);
  double deg = 0.0;
  for (const auto& st : r.ablated.trace) deg += cfg.lambda * std::fabs(st.p_b) * cfg.dt_h;
  EXPECT_NEAR(r.ablated.component_totals.degradation, deg, 1e-9);
  const auto plain = train(s, Scheme::kPredictionFree, cfg, agent, 3, 5);
  const Checkpoint c{plain.online, Scheme::kPredictionFree, 4, true, UpdateRule::kSoft, plain.scaler, cfg};
  EXPECT_EQ(rollout(c, s, nullptr, {500.0}).cumulative_reward, r.full.cumulative_reward);
  const auto peak = objective_ablation(s, Scheme::kPredictionFree, cfg, agent, 2, 5, Objective::kPeak, {500.0});
  EXPECT_EQ(peak.ablated_model.env.beta, 0.0);
}
