#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

/// Estimator of P(label = 1 | features). Fitted predictors are immutable and
/// safe for concurrent prediction. Outputs never reach exactly 0 or 1.
class ProbabilisticPredictor {
 public:
  virtual ~ProbabilisticPredictor() = default;

  virtual std::string_view family() const = 0;
  virtual std::size_t feature_count() const = 0;
  virtual double predict_probability(std::span<const double> features) const = 0;
  virtual nlohmann::json to_json() const = 0;

  Eigen::VectorXd predict_probabilities(const Eigen::MatrixXd& features) const;
};

using PredictorPtr = std::shared_ptr<const ProbabilisticPredictor>;

/// Bounds applied to every raw predictor output.
inline constexpr double kProbabilityFloor = 1e-12;
double clamp_probability(double p, double eps = kProbabilityFloor);

struct LogisticConfig {
  double lambda = 1e-4;
  double tol = 1e-8;
  int max_iterations = 500;
};

struct BoostedConfig {
  int rounds = 200;
  double learning_rate = 0.1;
  /// Row fraction drawn (without replacement) per round; 1 disables sampling.
  double subsample = 1.0;
  std::uint64_t seed = 0;
};

using ModelConfig = std::variant<LogisticConfig, BoostedConfig>;

std::string model_family(const ModelConfig& config);
nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct LogisticFitInfo {
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool separation = false;
};

class LogisticModel final : public ProbabilisticPredictor {
 public:
  LogisticModel(double intercept, std::vector<double> coefficients, LogisticConfig config,
                LogisticFitInfo info);

  std::string_view family() const override { return "logistic"; }
  std::size_t feature_count() const override { return coefficients_.size(); }
  double predict_probability(std::span<const double> features) const override;
  double linear_predictor(std::span<const double> features) const;
  nlohmann::json to_json() const override;

  double intercept() const noexcept { return intercept_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  const LogisticFitInfo& info() const noexcept { return info_; }

 private:
  double intercept_;
  std::vector<double> coefficients_;
  LogisticConfig config_;
  LogisticFitInfo info_;
};

/// Depth-1 regression tree: x[feature] <= threshold ? left : right.
/// feature == -1 encodes a constant (unsplit) leaf stored in `left`.
struct Stump {
  int feature = -1;
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;

  double operator()(std::span<const double> x) const {
    if (feature < 0) return left;
    return x[static_cast<std::size_t>(feature)] <= threshold ? left : right;
  }
};

class BoostedStumpsModel final : public ProbabilisticPredictor {
 public:
  BoostedStumpsModel(std::size_t feature_count, double base_score, std::vector<Stump> stumps,
                     BoostedConfig config);

  std::string_view family() const override { return "boosted"; }
  std::size_t feature_count() const override { return feature_count_; }
  double predict_probability(std::span<const double> features) const override;
  double score(std::span<const double> features) const;
  nlohmann::json to_json() const override;

  double base_score() const noexcept { return base_score_; }
  const std::vector<Stump>& stumps() const noexcept { return stumps_; }

 private:
  std::size_t feature_count_;
  double base_score_;
  std::vector<Stump> stumps_;
  BoostedConfig config_;
};

/// Adapter for known probability functions (simulation truth, fixtures).
class FunctionPredictor final : public ProbabilisticPredictor {
 public:
  using Function = std::function<double(std::span<const double>)>;
  FunctionPredictor(std::size_t feature_count, Function f, std::string label = "function");

  std::string_view family() const override { return "function"; }
  std::size_t feature_count() const override { return feature_count_; }
  double predict_probability(std::span<const double> features) const override;
  nlohmann::json to_json() const override;

 private:
  std::size_t feature_count_;
  Function f_;
  std::string label_;
};

PredictorPtr predictor_from_json(const nlohmann::json& j);

/// Penalized weighted mean log-likelihood of logistic regression in the
/// standardized parametrization used by the fitter:
///   f(b) = (1/W) sum_i w_i [y_i t_i - log(1 + exp(t_i))] - (lambda/2) |b_{1..p}|^2
/// with t = D b and D = [1, standardized features].
class LogisticObjective {
 public:
  LogisticObjective(const Eigen::MatrixXd& features, const Eigen::VectorXd& labels,
                    const Eigen::VectorXd& weights, double lambda);

  double value(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
  Eigen::MatrixXd hessian(const Eigen::VectorXd& beta) const;

  std::size_t dimension() const { return static_cast<std::size_t>(design_.cols()); }
  const Eigen::VectorXd& means() const { return means_; }
  const Eigen::VectorXd& scales() const { return scales_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd labels_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd means_;
  Eigen::VectorXd scales_;
  double total_weight_ = 0.0;
  double lambda_ = 0.0;
};

std::shared_ptr<const LogisticModel> fit_logistic(const Eigen::MatrixXd& features,
                                                  const Eigen::VectorXd& labels,
                                                  const Eigen::VectorXd& weights,
                                                  const LogisticConfig& config = {});

std::shared_ptr<const BoostedStumpsModel> fit_boosted_stumps(const Eigen::MatrixXd& features,
                                                             const Eigen::VectorXd& labels,
                                                             const Eigen::VectorXd& weights,
                                                             const BoostedConfig& config = {});

PredictorPtr fit_predictor(const ModelConfig& config, const Eigen::MatrixXd& features,
                           const Eigen::VectorXd& labels, const Eigen::VectorXd& weights);

/// Weighted mean negative log-likelihood.
double log_loss(std::span<const double> probabilities, const Eigen::VectorXd& labels,
                const Eigen::VectorXd& weights);

struct SelectionResult {
  PredictorPtr predictor;
  std::size_t chosen = 0;
  std::vector<double> mean_losses;  // NaN for candidates never evaluated
  std::vector<std::string> warnings;
};

/// k-fold cross-validated model selection by held-out log-loss. The winner is
/// refitted on all rows; ties go to the earlier candidate.
SelectionResult select_model(std::span<const ModelConfig> candidates, const Eigen::MatrixXd& features,
                             const Eigen::VectorXd& labels, const Eigen::VectorXd& weights, int folds,
                             std::uint64_t seed = 0);

/// Seeded fold id per row (balanced round-robin over a shuffled order).
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed);

/// Out-of-fold predictions for a single configuration. Folds whose training
/// part holds a single class fall back to that class' smoothed frequency.
std::vector<double> out_of_fold_predictions(const ModelConfig& config, const Eigen::MatrixXd& features,
                                            const Eigen::VectorXd& labels, const Eigen::VectorXd& weights,
                                            int folds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Nuisance models

struct NuisanceConfig {
  std::vector<ModelConfig> candidates{LogisticConfig{}, BoostedConfig{}};
  int folds = 5;
  double propensity_clip = 0.01;
  double outcome_clip = 1e-6;
  std::uint64_t seed = 0;
};

Eigen::MatrixXd covariate_matrix(const ObservationalDataset& data);
/// Rows of [z, x...] for the outcome regression.
Eigen::MatrixXd outcome_design(const ObservationalDataset& data);
Eigen::VectorXd treatment_vector(const ObservationalDataset& data);
Eigen::VectorXd outcome_vector(const ObservationalDataset& data);

/// e(x) = P(Z = 1 | X = x), clipped to [clip, 1 - clip].
class PropensityModel {
 public:
  PropensityModel(PredictorPtr predictor, double clip);

  double predict(std::span<const double> x) const;
  std::vector<double> predict_all(const ObservationalDataset& data) const;
  double clip() const noexcept { return clip_; }
  const PredictorPtr& predictor() const noexcept { return predictor_; }

 private:
  PredictorPtr predictor_;
  double clip_;
};

/// E(Y | Z = z, X = x) evaluable at both treatment values for any x.
class OutcomeModel {
 public:
  OutcomeModel(PredictorPtr predictor, double clip);

  double predict(int z, std::span<const double> x) const;
  double clip() const noexcept { return clip_; }
  const PredictorPtr& predictor() const noexcept { return predictor_; }

 private:
  PredictorPtr predictor_;
  double clip_;
};

struct FittedPropensity {
  PropensityModel model;
  SelectionResult selection;
};

struct FittedOutcome {
  OutcomeModel model;
  SelectionResult selection;
};

FittedPropensity fit_propensity(const ObservationalDataset& data, const NuisanceConfig& config);
FittedOutcome fit_outcome(const ObservationalDataset& data, const NuisanceConfig& config);

/// Fits the given family directly (no selection).
PropensityModel fit_propensity_with(const ObservationalDataset& data, const ModelConfig& config,
                                    double clip);
OutcomeModel fit_outcome_with(const ObservationalDataset& data, const ModelConfig& config, double clip);

/// Per-row nuisance values used by the weighting and adjustment estimators.
struct NuisanceValues {
  std::vector<double> propensity;
  std::vector<double> outcome0;
  std::vector<double> outcome1;
};

NuisanceValues evaluate_nuisance(const ObservationalDataset& data, const PropensityModel& propensity,
                                 const OutcomeModel& outcome);

/// Cross-fitted nuisance values: each row is predicted by models trained on
/// the other folds using the families chosen on the full sample.
NuisanceValues cross_fit_nuisance(const ObservationalDataset& data, const ModelConfig& propensity_family,
                                  const ModelConfig& outcome_family, const NuisanceConfig& config,
                                  int folds);

}  // namespace fairaudit
