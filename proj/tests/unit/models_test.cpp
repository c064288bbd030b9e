#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fairaudit/errors.hpp"
#include "fairaudit/models.hpp"

using namespace fairaudit;

namespace {

struct Sim {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd w;
};

Sim logistic_data(std::size_t n, std::uint64_t seed, double b0, double b1, double b2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  Sim s{Eigen::MatrixXd(n, 2), Eigen::VectorXd(n), Eigen::VectorXd::Ones(n)};
  for (std::size_t i = 0; i < n; ++i) {
    s.x(i, 0) = g(rng);
    s.x(i, 1) = 3.0 * g(rng) + 2.0;
    const double p = 1.0 / (1.0 + std::exp(-(b0 + b1 * s.x(i, 0) + b2 * s.x(i, 1))));
    s.y(i) = u(rng) < p ? 1.0 : 0.0;
  }
  return s;
}

}  // namespace

TEST(Logistic, RecoversCoefficients) {
  const auto s = logistic_data(20000, 1, -0.5, 1.0, 0.3);
  const auto m = fit_logistic(s.x, s.y, s.w);
  EXPECT_TRUE(m->info().converged);
  EXPECT_NEAR(m->intercept(), -0.5, 0.08);
  EXPECT_NEAR(m->coefficients()[0], 1.0, 0.06);
  EXPECT_NEAR(m->coefficients()[1], 0.3, 0.03);
}

TEST(Logistic, GradientVanishesAtOptimum) {
  const auto s = logistic_data(500, 2, 0.2, -0.7, 0.1);
  LogisticConfig cfg;
  cfg.lambda = 0.05;
  const auto m = fit_logistic(s.x, s.y, s.w, cfg);
  LogisticObjective obj(s.x, s.y, s.w, cfg.lambda);
  // map back to standardized parametrization
  Eigen::VectorXd beta(3);
  beta(1) = m->coefficients()[0] * obj.scales()(0);
  beta(2) = m->coefficients()[1] * obj.scales()(1);
  beta(0) = m->intercept() + m->coefficients()[0] * obj.means()(0) + m->coefficients()[1] * obj.means()(1);
  EXPECT_LT(obj.gradient(beta).norm(), 1e-6);
}

TEST(Logistic, GradientMatchesFiniteDifference) {
  const auto s = logistic_data(200, 3, 0.0, 1.0, -0.2);
  LogisticObjective obj(s.x, s.y, s.w, 0.1);
  Eigen::VectorXd b(3);
  b << 0.1, -0.4, 0.7;
  const auto g = obj.gradient(b);
  const auto h = obj.hessian(b);
  for (int k = 0; k < 3; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(3);
    e(k) = 1e-5;
    EXPECT_NEAR((obj.value(b + e) - obj.value(b - e)) / 2e-5, g(k), 1e-7);
    const Eigen::VectorXd dg = (obj.gradient(b + e) - obj.gradient(b - e)) / 2e-5;
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(dg(j), h(j, k), 1e-6);
  }
}

TEST(Logistic, SeparationIsFlaggedAndPredictionsStayInterior) {
  Eigen::MatrixXd x(20, 1);
  Eigen::VectorXd y(20);
  for (int i = 0; i < 20; ++i) {
    x(i, 0) = i;
    y(i) = i >= 10 ? 1 : 0;
  }
  const auto m = fit_logistic(x, y, Eigen::VectorXd::Ones(20));
  EXPECT_TRUE(m->info().separation);
  for (int i = 0; i < 20; ++i) {
    const double v = i;
    const double p = m->predict_probability(std::span<const double>(&v, 1));
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Boosted, FitsStepFunction) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  const int n = 4000;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    y(i) = u(rng) < (x(i, 0) < 0.5 ? 0.2 : 0.8) ? 1 : 0;
  }
  const auto m = fit_boosted_stumps(x, y, Eigen::VectorXd::Ones(n));
  const double lo = 0.25, hi = 0.75;
  EXPECT_NEAR(m->predict_probability(std::span<const double>(&lo, 1)), 0.2, 0.04);
  EXPECT_NEAR(m->predict_probability(std::span<const double>(&hi, 1)), 0.8, 0.04);
}

TEST(Boosted, SeededSubsampleIsDeterministic) {
  const auto s = logistic_data(300, 5, 0, 1, 0);
  BoostedConfig cfg;
  cfg.rounds = 30;
  cfg.subsample = 0.5;
  cfg.seed = 9;
  const auto a = fit_boosted_stumps(s.x, s.y, s.w, cfg);
  const auto b = fit_boosted_stumps(s.x, s.y, s.w, cfg);
  EXPECT_EQ(a->to_json(), b->to_json());
}

TEST(Predictors, JsonRoundTrip) {
  const auto s = logistic_data(300, 6, 0.3, 0.5, -0.1);
  BoostedConfig bc;
  bc.rounds = 20;
  const PredictorPtr models[] = {fit_logistic(s.x, s.y, s.w), fit_boosted_stumps(s.x, s.y, s.w, bc)};
  for (const auto& m : models) {
    const auto back = predictor_from_json(m->to_json());
    EXPECT_EQ(back->family(), m->family());
    for (Eigen::Index i = 0; i < 20; ++i) {
      const std::vector<double> row{s.x(i, 0), s.x(i, 1)};
      EXPECT_DOUBLE_EQ(back->predict_probability(row), m->predict_probability(row));
    }
  }
}

TEST(ModelConfig, JsonRoundTrip) {
  BoostedConfig b;
  b.rounds = 17;
  b.learning_rate = 0.3;
  const auto back = model_config_from_json(to_json(ModelConfig{b}));
  ASSERT_TRUE(std::holds_alternative<BoostedConfig>(back));
  EXPECT_EQ(std::get<BoostedConfig>(back).rounds, 17);
  EXPECT_EQ(model_family(ModelConfig{LogisticConfig{}}), "logistic");
  EXPECT_THROW(model_config_from_json(nlohmann::json{{"family", "forest"}}), ConfigError);
}

TEST(Selection, PicksLogisticForLinearTruth) {
  const auto s = logistic_data(2000, 7, -0.2, 1.2, 0.4);
  BoostedConfig bc;
  bc.rounds = 50;
  const std::vector<ModelConfig> cands{LogisticConfig{}, bc};
  const auto r = select_model(cands, s.x, s.y, s.w, 5, 1);
  EXPECT_EQ(r.chosen, 0u);
  EXPECT_EQ(r.mean_losses.size(), 2u);
  EXPECT_LE(r.mean_losses[0], r.mean_losses[1]);
}

TEST(Folds, BalancedAndSeeded) {
  const auto f = fold_assignment(103, 5, 3);
  std::vector<int> counts(5, 0);
  for (int k : f) ++counts[k];
  for (int c : counts) EXPECT_TRUE(c == 20 || c == 21);
  EXPECT_EQ(f, fold_assignment(103, 5, 3));
  EXPECT_NE(f, fold_assignment(103, 5, 4));
}

TEST(Nuisance, PropensityClipBounds) {
  CovariateSchema schema({{"x", CovariateKind::continuous}});
  std::vector<Observation> rows;
  for (int i = 0; i < 200; ++i) rows.push_back({i % 2, i < 100 ? 0 : 1, {static_cast<double>(i)}});
  ObservationalDataset d(schema, rows);
  const auto m = fit_propensity_with(d, LogisticConfig{}, 0.05);
  for (double p : m.predict_all(d)) {
    EXPECT_GE(p, 0.05);
    EXPECT_LE(p, 0.95);
  }
}

TEST(Nuisance, OutcomeDesignPutsTreatmentFirst) {
  CovariateSchema schema({{"a", CovariateKind::continuous}});
  ObservationalDataset d(schema, {{1, 0, {2.5}}, {0, 1, {-1.0}}});
  const auto m = outcome_design(d);
  EXPECT_DOUBLE_EQ(m(0, 0), 0);
  EXPECT_DOUBLE_EQ(m(1, 0), 1);
  EXPECT_DOUBLE_EQ(m(0, 1), 2.5);
}

TEST(LogLoss, MatchesDirectSum) {
  const std::vector<double> p{0.2, 0.9, 0.5};
  Eigen::VectorXd y(3), w(3);
  y << 0, 1, 1;
  w << 1, 2, 1;
  const double expect = -(std::log(0.8) + 2 * std::log(0.9) + std::log(0.5)) / 4;
  EXPECT_NEAR(log_loss(p, y, w), expect, 1e-14);
}
