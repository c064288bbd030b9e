#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairaudit/errors.hpp"
#include "fairaudit/estimators.hpp"

using namespace fairaudit;

namespace {

ObservationalDataset counts(int n0, int y0, int n1, int y1) {
  CovariateSchema s({{"x", CovariateKind::continuous}});
  std::vector<Observation> rows;
  for (int i = 0; i < n0; ++i) rows.push_back({i < y0 ? 1 : 0, 0, {static_cast<double>(i)}});
  for (int i = 0; i < n1; ++i) rows.push_back({i < y1 ? 1 : 0, 1, {static_cast<double>(i)}});
  return ObservationalDataset(s, rows);
}

ConfidenceInterval interval(double lo, double hi) {
  ConfidenceInterval ci;
  ci.lo = lo;
  ci.hi = hi;
  return ci;
}

}  // namespace

TEST(Critical, StandardValues) {
  EXPECT_NEAR(normal_critical_value(0.95), 1.959963984540054, 1e-12);
  EXPECT_NEAR(normal_critical_value(0.90), 1.644853626951472, 1e-12);
  EXPECT_THROW(normal_critical_value(1.0), ConfigError);
}

TEST(Unmatched, DifferenceOfProportions) {
  const auto d = counts(200, 50, 100, 40);
  const auto e = ate_unmatched(d);
  EXPECT_NEAR(e.value, 0.4 - 0.25, 1e-15);
  const double se = std::sqrt(0.4 * 0.6 / 100 + 0.25 * 0.75 / 200);
  EXPECT_NEAR(e.ci.hi - e.value, 1.959963984540054 * se, 1e-12);
  EXPECT_EQ(e.n0, 200u);
  EXPECT_EQ(e.n1, 100u);
}

TEST(Unmatched, DegenerateWhenOutcomesConstant) {
  const auto e = ate_unmatched(counts(10, 0, 10, 0));
  EXPECT_TRUE(e.ci.degenerate);
  EXPECT_DOUBLE_EQ(e.ci.lo, 0.0);
  EXPECT_DOUBLE_EQ(e.ci.hi, 0.0);
  EXPECT_EQ(fairness_verdict(e), Verdict::no_evidence);
}

TEST(Unmatched, NeedsBothGroups) { EXPECT_THROW(ate_unmatched(counts(5, 1, 0, 0)), DataError); }

TEST(Verdict, BoundsAreInclusive) {
  EXPECT_EQ(fairness_verdict(interval(-0.39, -0.35)), Verdict::evidence_of_unfairness);
  EXPECT_EQ(fairness_verdict(interval(-0.03, 0.01)), Verdict::no_evidence);
  EXPECT_EQ(fairness_verdict(interval(0.0, 0.2)), Verdict::no_evidence);
  EXPECT_EQ(fairness_verdict(interval(-0.2, 0.0)), Verdict::no_evidence);
  EXPECT_EQ(fairness_verdict(interval(1e-12, 0.2)), Verdict::evidence_of_unfairness);
  EXPECT_EQ(to_string(Verdict::no_evidence), "no-evidence");
}

TEST(InverseWeighting, HorvitzThompsonByHand) {
  const auto d = counts(2, 1, 2, 2);
  const std::vector<double> e{0.5, 0.25, 0.5, 0.8};
  const auto r = ate_ipw_ht(d, e);
  // rows: (y1,z0,e.5) (y0,z0) (y1,z1,e.5) (y1,z1,e.8)
  const double phi[4] = {-1 / 0.5, 0.0, 1 / 0.5, 1 / 0.8};
  const double mean = (phi[0] + phi[1] + phi[2] + phi[3]) / 4;
  EXPECT_NEAR(r.value, std::clamp(mean, -1.0, 1.0), 1e-15);
  EXPECT_EQ(r.estimator, Estimator::inverse_weighting2);
}

TEST(InverseWeighting, RejectsUnclippedPropensity) {
  const auto d = counts(2, 1, 2, 1);
  const std::vector<double> e{0.5, 0.0, 0.5, 0.5};
  EXPECT_THROW(ate_ipw_ht(d, e), EstimationError);
}

TEST(InverseWeighting, DoublyRobustWithPerfectOutcomeEqualsAdjustment) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  CovariateSchema s({{"x", CovariateKind::continuous}});
  std::vector<Observation> rows;
  NuisanceValues nv;
  for (int i = 0; i < 400; ++i) {
    const double x = u(rng);
    const int z = u(rng) < 0.3 + 0.4 * x ? 1 : 0;
    rows.push_back({z, z, {x}});  // y = z: outcome model m(z, x) = z is exact
    nv.propensity.push_back(0.3 + 0.4 * x);
    nv.outcome0.push_back(0.0);
    nv.outcome1.push_back(1.0);
  }
  ObservationalDataset d(s, rows);
  const auto dr = ate_ipw_dr(d, nv);
  EXPECT_NEAR(dr.value, 1.0, 1e-12);
  const auto adj = ate_adjusted(d, nv);
  EXPECT_NEAR(adj.value, 1.0, 1e-12);
  EXPECT_TRUE(adj.ci.degenerate);
}

TEST(Matched, UniformSamplesReproduceUnmatched) {
  const auto d = counts(40, 10, 30, 18);
  const auto c = uniform_group(d, 0), t = uniform_group(d, 1);
  const auto m = ate_matched(c, t);
  const auto u = ate_unmatched(d);
  EXPECT_NEAR(m.value, u.value, 1e-14);
  EXPECT_NEAR(m.ci.lo, u.ci.lo, 1e-12);
  EXPECT_NEAR(m.ci.hi, u.ci.hi, 1e-12);
}

TEST(Matched, EffectiveSizeWidensInterval) {
  const auto d = counts(40, 10, 30, 18);
  auto c = uniform_group(d, 0);
  const auto t = uniform_group(d, 1);
  const auto base = ate_matched(c, t);
  for (std::size_t i = 0; i < c.size(); ++i) c.weights[i] = i < 20 ? 1.5 / 40 : 0.5 / 40;
  const auto skewed = ate_matched(c, t);
  EXPECT_GT(skewed.ci.hi - skewed.ci.lo, base.ci.hi - base.ci.lo - 1e-12);
}

TEST(Estimators, ClampedToUnitInterval) {
  const auto d = counts(1, 0, 1, 1);
  const std::vector<double> e{0.9, 0.1};
  const auto r = ate_ipw_ht(d, e);
  EXPECT_LE(r.value, 1.0);
  EXPECT_GE(r.ci.lo, -1.0);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Estimators, NamesRoundTrip) {
  ASSERT_EQ(all_estimators().size(), 8u);
  for (auto e : all_estimators()) EXPECT_EQ(estimator_from_string(to_string(e)), e);
  EXPECT_EQ(to_string(Estimator::inverse_weighting2), "InverseWeighting2");
  EXPECT_THROW(estimator_from_string("Matched"), ConfigError);
}
