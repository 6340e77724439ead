#include <gtest/gtest.h>

#include <algorithm>

#include "microgrid/errors.hpp"
#include "microgrid/schemes.hpp"

using namespace microgrid;

namespace {

// PR scaled with min 0 max 1, CI with min 0 max 1000, P_u raw.
ScenarioSeries tiny(const std::vector<double>& pr, const std::vector<double>& ci,
                    const std::vector<double>& pu) {
  ScenarioSeries s;
  for (std::size_t i = 0; i < pr.size(); ++i)
    s.records.push_back(make_record(static_cast<std::int64_t>(i), pr[i], ci[i], pu[i], 0.0));
  return s;
}

Scaler unit_scaler() { return Scaler{MinMax{0.0, 1.0}, MinMax{0.0, 1000.0}}; }

}  // namespace

TEST(StateDim, PerScheme) {
  EXPECT_EQ(state_dim(Scheme::kPredictionBased, 24), 76u);
  EXPECT_EQ(state_dim(Scheme::kPredictionFree, 24), 76u);
  EXPECT_EQ(state_dim(Scheme::kCommon, 24), 4u);
  EXPECT_EQ(state_dim(Scheme::kPredictionFree, 1), 7u);
}

TEST(BuildState, PredictionFreeOrdering) {
  const MicrogridConfig cfg;
  const auto s = tiny({0.2, 0.4}, {100, 300}, {0.5 * cfg.peak_limit_kw, 0.6 * cfg.peak_limit_kw});
  const auto st = build_state(s, 1, {500.0}, Scheme::kPredictionFree, 1, unit_scaler(), cfg);
  const std::vector<double> want = {0.2, 0.4, 0.1, 0.3, 0.5, 0.6, 0.5};
  ASSERT_EQ(st.features.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(st.features[i], want[i], 1e-15);
  EXPECT_THROW(build_state(s, 0, {500.0}, Scheme::kPredictionFree, 1, unit_scaler(), cfg),
               ContractViolation);
}

TEST(BuildState, PredictionBasedLooksAhead) {
  const MicrogridConfig cfg;
  const auto s = tiny({0.2, 0.4, 0.9}, {100, 300, 500}, {0, 445, 890});
  const auto st = build_state(s, 0, {250.0}, Scheme::kPredictionBased, 2, unit_scaler(), cfg);
  const std::vector<double> want = {0.2, 0.4, 0.9, 0.1, 0.3, 0.5, 0.0, 0.1, 0.2, 0.25};
  ASSERT_EQ(st.features.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(st.features[i], want[i], 1e-15);
  EXPECT_THROW(build_state(s, 1, {250.0}, Scheme::kPredictionBased, 2, unit_scaler(), cfg),
               ContractViolation);
}

TEST(BuildState, CommonUsesCurrentOnly) {
  const MicrogridConfig cfg;
  const auto s = tiny({0.2, 0.7}, {100, 800}, {0, 4450});
  const auto st = build_state(s, 1, {1000.0}, Scheme::kCommon, 24, unit_scaler(), cfg);
  const std::vector<double> want = {0.7, 0.8, 1.0, 1.0};
  ASSERT_EQ(st.features.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(st.features[i], want[i], 1e-15);
}

TEST(BuildState, ClampsOutOfRangeScaledValues) {
  const MicrogridConfig cfg;
  const auto s = tiny({1.7, -0.5}, {2000, -10}, {0, 0});
  const auto st = build_state(s, 1, {500.0}, Scheme::kPredictionFree, 1, unit_scaler(), cfg);
  EXPECT_EQ(st.features[0], 1.0);
  EXPECT_EQ(st.features[1], 0.0);
  EXPECT_EQ(st.features[2], 1.0);
  EXPECT_EQ(st.features[3], 0.0);
  const auto in = step_inputs(s, 0, unit_scaler());
  EXPECT_EQ(in.price_scaled, 1.0);
  EXPECT_EQ(in.carbon_scaled, 1.0);
}

TEST(BuildState, PbAndPfAreShiftedViews) {
  const MicrogridConfig cfg;
  const auto s = generate_synthetic(3, 4);
  const auto sc = fit_scaler(s);
  const int T = 24;
  for (std::size_t t = 0; t + T < s.size(); t += 7) {
    const auto pb = build_state(s, t, {400.0}, Scheme::kPredictionBased, T, sc, cfg);
    const auto pf = build_state(s, t + T, {400.0}, Scheme::kPredictionFree, T, sc, cfg);
    EXPECT_EQ(pb.features, pf.features);
  }
}

TEST(BuildState, IntoMatchesBuild) {
  const MicrogridConfig cfg;
  const auto s = generate_synthetic(3, 4);
  const auto sc = fit_scaler(s);
  std::vector<double> buf;
  build_state_into(s, 30, {321.0}, Scheme::kPredictionFree, 24, sc, cfg, buf);
  EXPECT_EQ(buf, build_state(s, 30, {321.0}, Scheme::kPredictionFree, 24, sc, cfg).features);
  for (double f : buf) EXPECT_TRUE(std::isfinite(f));
}

TEST(ValidRange, PerScheme) {
  auto r = valid_state_range(Scheme::kPredictionFree, 24, 100);
  EXPECT_EQ(r.first, 24u);
  EXPECT_EQ(r.last, 99u);
  r = valid_state_range(Scheme::kPredictionBased, 24, 100);
  EXPECT_EQ(r.first, 0u);
  EXPECT_EQ(r.last, 75u);
  r = valid_state_range(Scheme::kCommon, 24, 100);
  EXPECT_EQ(r.first, 0u);
  EXPECT_EQ(r.last, 99u);
}
