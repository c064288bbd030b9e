#include <gtest/gtest.h>

#include <cmath>

#include "fairaudit/errors.hpp"
#include "fairaudit/estimators.hpp"
#include "fairaudit/scenario.hpp"

using namespace fairaudit;

TEST(Scenario, SeededAndSized) {
  const auto spec = preset("confounded-shift", 250, 9);
  const auto a = generate(spec), b = generate(spec);
  EXPECT_EQ(a.size(), 250u);
  EXPECT_EQ(a.rows(), b.rows());
  EXPECT_EQ(a.schema().names(), (std::vector<std::string>{"x1", "x2", "x3"}));
  auto other = spec;
  other.seed = 10;
  EXPECT_NE(generate(other).rows(), a.rows());
}

TEST(Scenario, LatentColumnIsOptional) {
  auto spec = preset("hidden-confounder", 100, 1);
  const auto plain = generate(spec);
  spec.emit_u = true;
  const auto with_u = generate(spec);
  EXPECT_EQ(with_u.schema().names().back(), "u");
  for (std::size_t i = 0; i < plain.size(); ++i) {
    EXPECT_EQ(plain.row(i).z, with_u.row(i).z);
    EXPECT_EQ(plain.row(i).y, with_u.row(i).y);
  }
  EXPECT_TRUE(spec.has_hidden_confounding());
  EXPECT_THROW(oracle_propensity(spec), ConfigError);
}

TEST(Scenario, PropensityBounds) {
  auto spec = preset("confounded-shift", 10, 1);
  spec.propensity.intercept = 50;
  const std::vector<double> x{0, 0, 0};
  EXPECT_DOUBLE_EQ(spec.propensity_at(x, 0), 1 - kPropensityBound);
}

TEST(Scenario, ShiftFormTruthIsExact) {
  const auto t = true_ate(preset("confounded-shift", 10, 1));
  EXPECT_TRUE(t.analytic);
  EXPECT_NEAR(t.value, 0.2, 1e-15);
  EXPECT_EQ(true_ate(preset("null-randomized")).value, 0.0);
}

TEST(Scenario, MonteCarloTruth) {
  auto spec = preset("confounded-null", 10, 1);
  ProbabilityForm p1 = spec.outcome0;
  p1.intercept += 0.5;
  spec.outcome1 = p1;
  const auto t = true_ate(spec, 200000);
  EXPECT_FALSE(t.analytic);
  EXPECT_GT(t.value, 0.0);
  EXPECT_LT(t.standard_error, 0.002);
}

TEST(Scenario, RandomizedPresetIsBalanced) {
  const auto d = generate(preset("null-randomized", 20000, 2));
  EXPECT_NEAR(ate_unmatched(d).value, 0.0, 0.03);
}

TEST(Scenario, ConfoundingBiasesNaiveContrast) {
  const auto d = generate(preset("confounded-null", 20000, 2));
  EXPECT_GT(ate_unmatched(d).value, 0.05);
}

TEST(Scenario, JsonForms) {
  const auto a = scenario_from_json(nlohmann::json{{"preset", "confounded-shift"}, {"n", 77}, {"seed", 4}});
  EXPECT_EQ(a.n, 77u);
  const auto b = scenario_from_json(to_json(a));
  EXPECT_EQ(generate(a).rows(), generate(b).rows());
  EXPECT_THROW(scenario_from_json(nlohmann::json{{"preset", "nope"}}), ConfigError);
  EXPECT_EQ(preset_names().size(), 4u);
}

TEST(Scenario, ValidateRejectsMismatchedCoefficients) {
  auto spec = preset("confounded-shift");
  spec.propensity.coefficients.pop_back();
  EXPECT_THROW(spec.validate(), ConfigError);
}
