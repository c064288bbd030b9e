#include "fairaudit/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairaudit/errors.hpp"
#include "fairaudit/random.hpp"

namespace fairaudit {

namespace {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void check_training_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (x.rows() != y.size() || y.size() != w.size())
    throw EstimationError("feature/label/weight lengths differ");
  if (x.rows() == 0) throw EstimationError("cannot fit a model on zero rows");
  bool has0 = false, has1 = false;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw EstimationError("weights must be nonnegative");
    if (y[i] != 0.0 && y[i] != 1.0) throw EstimationError("labels must be 0 or 1");
    total += w[i];
    if (w[i] > 0) (y[i] == 1.0 ? has1 : has0) = true;
  }
  if (!(total > 0.0)) throw EstimationError("weights are all zero");
  if (!has0 || !has1) throw EstimationError("fitting requires both label values to be present");
  if (!x.allFinite()) throw EstimationError("features contain non-finite values");
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(idx[r]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[idx[r]];
  return out;
}

bool single_class(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (w[i] > 0) (y[i] == 1.0 ? has1 : has0) = true;
  return !(has0 && has1);
}

double smoothed_rate(const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  return (y.dot(w) + 0.5) / (w.sum() + 1.0);
}

std::vector<double> row_vector(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(c)] = m(r, c);
  return out;
}

}  // namespace

double clamp_probability(double p, double eps) {
  if (std::isnan(p)) throw EstimationError("predictor produced NaN");
  return std::clamp(p, eps, 1.0 - eps);
}

Eigen::VectorXd ProbabilisticPredictor::predict_probabilities(const Eigen::MatrixXd& features) const {
  Eigen::VectorXd out(features.rows());
  std::vector<double> row(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) row[static_cast<std::size_t>(c)] = features(r, c);
    out[r] = predict_probability(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configs

std::string model_family(const ModelConfig& config) {
  return std::holds_alternative<LogisticConfig>(config) ? "logistic" : "boosted";
}

nlohmann::json to_json(const ModelConfig& config) {
  if (const auto* l = std::get_if<LogisticConfig>(&config))
    return {{"family", "logistic"}, {"lambda", l->lambda}, {"tol", l->tol}, {"max_iterations", l->max_iterations}};
  const auto& b = std::get<BoostedConfig>(config);
  return {{"family", "boosted"},     {"rounds", b.rounds},
          {"learning_rate", b.learning_rate}, {"subsample", b.subsample},
          {"seed", b.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  const auto family = j.value("family", std::string("logistic"));
  if (family == "logistic") {
    LogisticConfig c;
    c.lambda = j.value("lambda", c.lambda);
    c.tol = j.value("tol", c.tol);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    if (!(c.lambda >= 0) || !(c.tol > 0) || c.max_iterations < 1)
      throw ConfigError("invalid logistic configuration");
    return c;
  }
  if (family == "boosted") {
    BoostedConfig c;
    c.rounds = j.value("rounds", c.rounds);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.subsample = j.value("subsample", c.subsample);
    c.seed = j.value("seed", c.seed);
    if (c.rounds < 1 || !(c.learning_rate > 0) || !(c.subsample > 0 && c.subsample <= 1))
      throw ConfigError("invalid boosted configuration");
    return c;
  }
  throw ConfigError("unknown model family '" + family + "'");
}

// ---------------------------------------------------------------------------
// Logistic regression

LogisticModel::LogisticModel(double intercept, std::vector<double> coefficients, LogisticConfig config,
                             LogisticFitInfo info)
    : intercept_(intercept), coefficients_(std::move(coefficients)), config_(config), info_(info) {}

double LogisticModel::linear_predictor(std::span<const double> x) const {
  double t = intercept_;
  for (std::size_t k = 0; k < coefficients_.size(); ++k) t += coefficients_[k] * x[k];
  return t;
}

double LogisticModel::predict_probability(std::span<const double> x) const {
  return clamp_probability(sigmoid(linear_predictor(x)));
}

nlohmann::json LogisticModel::to_json() const {
  return {{"family", "logistic"},
          {"config", fairaudit::to_json(ModelConfig{config_})},
          {"intercept", intercept_},
          {"coefficients", coefficients_},
          {"iterations", info_.iterations},
          {"gradient_norm", info_.gradient_norm},
          {"converged", info_.converged},
          {"separation", info_.separation}};
}

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& w, double lambda)
    : labels_(y), weights_(w), lambda_(lambda) {
  const Eigen::Index n = x.rows(), p = x.cols();
  total_weight_ = w.sum();
  means_.resize(p);
  scales_.resize(p);
  design_.resize(n, p + 1);
  design_.col(0).setOnes();
  for (Eigen::Index k = 0; k < p; ++k) {
    const double mean = w.dot(x.col(k)) / total_weight_;
    const double var = w.dot((x.col(k).array() - mean).square().matrix()) / total_weight_;
    const double sd = std::sqrt(var);
    means_[k] = mean;
    scales_[k] = sd > 1e-12 * (1.0 + std::abs(mean)) ? sd : 1.0;
    design_.col(k + 1) = (x.col(k).array() - mean) / scales_[k];
  }
}

double LogisticObjective::value(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd t = design_ * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) ll += weights_[i] * (labels_[i] * t[i] - softplus(t[i]));
  return ll / total_weight_ - 0.5 * lambda_ * beta.tail(beta.size() - 1).squaredNorm();
}

Eigen::VectorXd LogisticObjective::gradient(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd t = design_ * beta;
  Eigen::VectorXd r(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) r[i] = weights_[i] * (labels_[i] - sigmoid(t[i]));
  Eigen::VectorXd g = design_.transpose() * r / total_weight_;
  g.tail(g.size() - 1) -= lambda_ * beta.tail(beta.size() - 1);
  return g;
}

Eigen::MatrixXd LogisticObjective::hessian(const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd t = design_ * beta;
  Eigen::VectorXd s(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double p = sigmoid(t[i]);
    s[i] = weights_[i] * p * (1.0 - p);
  }
  Eigen::MatrixXd h = -(design_.transpose() * s.asDiagonal() * design_) / total_weight_;
  for (Eigen::Index k = 1; k < h.rows(); ++k) h(k, k) -= lambda_;
  return h;
}

std::shared_ptr<const LogisticModel> fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                  const Eigen::VectorXd& w, const LogisticConfig& config) {
  check_training_inputs(x, y, w);
  const LogisticObjective objective(x, y, w, config.lambda);
  const auto dim = static_cast<Eigen::Index>(objective.dimension());

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dim);
  const double ybar = std::clamp(y.dot(w) / w.sum(), 1e-6, 1.0 - 1e-6);
  beta[0] = std::log(ybar / (1.0 - ybar));

  LogisticFitInfo info;
  double f = objective.value(beta);
  for (info.iterations = 0; info.iterations < config.max_iterations; ++info.iterations) {
    const Eigen::VectorXd g = objective.gradient(beta);
    info.gradient_norm = g.cwiseAbs().maxCoeff();
    if (info.gradient_norm < config.tol) {
      info.converged = true;
      break;
    }
    // Ascent direction from the (negative definite) Hessian; fall back to the
    // gradient if the factorization is unusable.
    Eigen::MatrixXd neg_h = -objective.hessian(beta);
    neg_h.diagonal().array() += 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
    Eigen::VectorXd step = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || g.dot(step) <= 0) step = g;
    double t = 1.0;
    const double slope = g.dot(step);
    Eigen::VectorXd candidate = beta + step;
    double fc = objective.value(candidate);
    while (fc < f + 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      candidate = beta + t * step;
      fc = objective.value(candidate);
    }
    if (!(fc >= f)) break;  // no ascent possible at working precision
    beta = candidate;
    f = fc;
  }
  if (!info.converged) {
    info.gradient_norm = objective.gradient(beta).cwiseAbs().maxCoeff();
    info.converged = info.gradient_norm < config.tol;
  }

  // Map back to the original feature scale.
  const auto p = dim - 1;
  std::vector<double> coefficients(static_cast<std::size_t>(p));
  double intercept = beta[0];
  for (Eigen::Index k = 0; k < p; ++k) {
    coefficients[static_cast<std::size_t>(k)] = beta[k + 1] / objective.scales()[k];
    intercept -= beta[k + 1] * objective.means()[k] / objective.scales()[k];
  }

  // Perfect separation: every weighted row classified correctly by sign.
  bool separated = true;
  for (Eigen::Index i = 0; i < x.rows() && separated; ++i) {
    if (w[i] <= 0) continue;
    double t = intercept;
    for (Eigen::Index k = 0; k < p; ++k) t += coefficients[static_cast<std::size_t>(k)] * x(i, k);
    separated = (y[i] == 1.0) ? t > 0 : t < 0;
  }
  info.separation = separated;

  return std::make_shared<const LogisticModel>(intercept, std::move(coefficients), config, info);
}

// ---------------------------------------------------------------------------

FunctionPredictor::FunctionPredictor(std::size_t feature_count, Function f, std::string label)
    : feature_count_(feature_count), f_(std::move(f)), label_(std::move(label)) {}

double FunctionPredictor::predict_probability(std::span<const double> x) const {
  return clamp_probability(f_(x));
}

nlohmann::json FunctionPredictor::to_json() const {
  return {{"family", "function"}, {"label", label_}, {"feature_count", feature_count_}};
}

PredictorPtr predictor_from_json(const nlohmann::json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "logistic") {
    const auto cfg = std::get<LogisticConfig>(model_config_from_json(j.at("config")));
    LogisticFitInfo info;
    info.iterations = j.value("iterations", 0);
    info.gradient_norm = j.value("gradient_norm", 0.0);
    info.converged = j.value("converged", false);
    info.separation = j.value("separation", false);
    return std::make_shared<const LogisticModel>(j.at("intercept").get<double>(),
                                                 j.at("coefficients").get<std::vector<double>>(), cfg, info);
  }
  if (family == "boosted") {
    const auto cfg = std::get<BoostedConfig>(model_config_from_json(j.at("config")));
    std::vector<Stump> stumps;
    for (const auto& s : j.at("stumps"))
      stumps.push_back({s.at(0).get<int>(), s.at(1).get<double>(), s.at(2).get<double>(), s.at(3).get<double>()});
    return std::make_shared<const BoostedStumpsModel>(j.at("feature_count").get<std::size_t>(),
                                                      j.at("base_score").get<double>(), std::move(stumps), cfg);
  }
  throw ConfigError("cannot load predictor of family '" + family + "'");
}

PredictorPtr fit_predictor(const ModelConfig& config, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& w) {
  if (const auto* l = std::get_if<LogisticConfig>(&config)) return fit_logistic(x, y, w, *l);
  return fit_boosted_stumps(x, y, w, std::get<BoostedConfig>(config));
}

double log_loss(std::span<const double> p, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  double total = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    const double q = clamp_probability(p[i]);
    total -= w[k] * (y[k] == 1.0 ? std::log(q) : std::log1p(-q));
    wsum += w[k];
  }
  return total / wsum;
}

// ---------------------------------------------------------------------------
// Model selection

std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0xf01d);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<int> fold(n);
  for (std::size_t r = 0; r < n; ++r) fold[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  return fold;
}

namespace {

struct FoldSplit {
  std::vector<Eigen::Index> train, test;
};

std::vector<FoldSplit> make_splits(std::size_t n, int folds, std::uint64_t seed) {
  const auto fold = fold_assignment(n, folds, seed);
  std::vector<FoldSplit> splits(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < n; ++i)
    for (int f = 0; f < folds; ++f)
      (fold[i] == f ? splits[static_cast<std::size_t>(f)].test : splits[static_cast<std::size_t>(f)].train)
          .push_back(static_cast<Eigen::Index>(i));
  return splits;
}

}  // namespace

SelectionResult select_model(std::span<const ModelConfig> candidates, const Eigen::MatrixXd& x,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& w, int folds, std::uint64_t seed) {
  if (candidates.empty()) throw ConfigError("model selection needs at least one candidate");
  SelectionResult result;
  result.mean_losses.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());
  if (candidates.size() == 1) {
    result.predictor = fit_predictor(candidates[0], x, y, w);
    return result;
  }
  if (folds < 2) throw ConfigError("model selection needs at least 2 folds");
  if (x.rows() < 2 * folds) throw ConfigError("model selection needs at least 2k rows");

  std::vector<double> sum(candidates.size(), 0.0);
  int used = 0;
  for (const auto& split : make_splits(static_cast<std::size_t>(x.rows()), folds, seed)) {
    const auto y_train = take(y, split.train);
    const auto w_train = take(w, split.train);
    if (single_class(y_train, w_train)) {
      result.warnings.push_back("skipped fold with a single-class training set");
      continue;
    }
    const auto x_train = take_rows(x, split.train);
    const auto x_test = take_rows(x, split.test);
    const auto y_test = take(y, split.test);
    const auto w_test = take(w, split.test);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto model = fit_predictor(candidates[c], x_train, y_train, w_train);
      const Eigen::VectorXd p = model->predict_probabilities(x_test);
      sum[c] += log_loss(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), y_test, w_test);
    }
    ++used;
  }
  if (used == 0) throw EstimationError("every cross-validation fold is degenerate (single class)");
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    result.mean_losses[c] = sum[c] / used;
    if (result.mean_losses[c] < result.mean_losses[result.chosen]) result.chosen = c;
  }
  result.predictor = fit_predictor(candidates[result.chosen], x, y, w);
  return result;
}

std::vector<double> out_of_fold_predictions(const ModelConfig& config, const Eigen::MatrixXd& x,
                                            const Eigen::VectorXd& y, const Eigen::VectorXd& w, int folds,
                                            std::uint64_t seed) {
  if (folds < 2 || x.rows() < 2 * folds) throw ConfigError("out-of-fold prediction needs k >= 2 and n >= 2k");
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (const auto& split : make_splits(static_cast<std::size_t>(x.rows()), folds, seed)) {
    const auto y_train = take(y, split.train);
    const auto w_train = take(w, split.train);
    if (single_class(y_train, w_train)) {
      const double rate = smoothed_rate(y_train, w_train);
      for (auto i : split.test) out[static_cast<std::size_t>(i)] = rate;
      continue;
    }
    const auto model = fit_predictor(config, take_rows(x, split.train), y_train, w_train);
    for (auto i : split.test) out[static_cast<std::size_t>(i)] = model->predict_probability(row_vector(x, i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nuisance models

Eigen::MatrixXd covariate_matrix(const ObservationalDataset& data) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.schema().size()));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < data.schema().size(); ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = data.row(i).x[k];
  return m;
}

Eigen::MatrixXd outcome_design(const ObservationalDataset& data) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(data.schema().size() + 1));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = data.row(i).z;
    for (std::size_t k = 0; k < data.schema().size(); ++k) m(r, static_cast<Eigen::Index>(k + 1)) = data.row(i).x[k];
  }
  return m;
}

Eigen::VectorXd treatment_vector(const ObservationalDataset& data) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) v[static_cast<Eigen::Index>(i)] = data.row(i).z;
  return v;
}

Eigen::VectorXd outcome_vector(const ObservationalDataset& data) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) v[static_cast<Eigen::Index>(i)] = data.row(i).y;
  return v;
}

PropensityModel::PropensityModel(PredictorPtr predictor, double clip) : predictor_(std::move(predictor)), clip_(clip) {
  if (!predictor_) throw EstimationError("propensity model without predictor");
  if (!(clip_ > 0.0 && clip_ < 0.5)) throw ConfigError("propensity clip must lie in (0, 0.5)");
}

double PropensityModel::predict(std::span<const double> x) const {
  const double p = predictor_->predict_probability(x);
  if (!std::isfinite(p)) throw EstimationError("propensity prediction is not finite");
  return std::clamp(p, clip_, 1.0 - clip_);
}

std::vector<double> PropensityModel::predict_all(const ObservationalDataset& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& r : data.rows()) out.push_back(predict(r.x));
  return out;
}

OutcomeModel::OutcomeModel(PredictorPtr predictor, double clip) : predictor_(std::move(predictor)), clip_(clip) {
  if (!predictor_) throw EstimationError("outcome model without predictor");
  if (!(clip_ >= 0.0 && clip_ < 0.5)) throw ConfigError("outcome clip must lie in [0, 0.5)");
}

double OutcomeModel::predict(int z, std::span<const double> x) const {
  thread_local std::vector<double> row;
  row.resize(x.size() + 1);
  row[0] = z;
  std::copy(x.begin(), x.end(), row.begin() + 1);
  const double p = predictor_->predict_probability(row);
  if (!std::isfinite(p)) throw EstimationError("outcome prediction is not finite");
  return std::clamp(p, clip_, 1.0 - clip_);
}

FittedPropensity fit_propensity(const ObservationalDataset& data, const NuisanceConfig& config) {
  if (data.empty()) throw DataError("cannot fit a propensity model on an empty dataset");
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size()));
  auto selection = select_model(config.candidates, covariate_matrix(data), treatment_vector(data), w,
                                config.folds, derive_seed(config.seed, 1));
  PropensityModel model(selection.predictor, config.propensity_clip);
  return {std::move(model), std::move(selection)};
}

FittedOutcome fit_outcome(const ObservationalDataset& data, const NuisanceConfig& config) {
  data.require_both_groups();
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size()));
  auto selection = select_model(config.candidates, outcome_design(data), outcome_vector(data), w, config.folds,
                                derive_seed(config.seed, 2));
  OutcomeModel model(selection.predictor, config.outcome_clip);
  return {std::move(model), std::move(selection)};
}

PropensityModel fit_propensity_with(const ObservationalDataset& data, const ModelConfig& config, double clip) {
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size()));
  return PropensityModel(fit_predictor(config, covariate_matrix(data), treatment_vector(data), w), clip);
}

OutcomeModel fit_outcome_with(const ObservationalDataset& data, const ModelConfig& config, double clip) {
  data.require_both_groups();
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.size()));
  return OutcomeModel(fit_predictor(config, outcome_design(data), outcome_vector(data), w), clip);
}

NuisanceValues evaluate_nuisance(const ObservationalDataset& data, const PropensityModel& propensity,
                                 const OutcomeModel& outcome) {
  NuisanceValues v;
  v.propensity.reserve(data.size());
  v.outcome0.reserve(data.size());
  v.outcome1.reserve(data.size());
  for (const auto& r : data.rows()) {
    v.propensity.push_back(propensity.predict(r.x));
    v.outcome0.push_back(outcome.predict(0, r.x));
    v.outcome1.push_back(outcome.predict(1, r.x));
  }
  return v;
}

NuisanceValues cross_fit_nuisance(const ObservationalDataset& data, const ModelConfig& propensity_family,
                                  const ModelConfig& outcome_family, const NuisanceConfig& config, int folds) {
  if (folds < 2 || data.size() < static_cast<std::size_t>(2 * folds))
    throw ConfigError("cross-fitting needs k >= 2 and n >= 2k");
  NuisanceValues v;
  v.propensity.resize(data.size());
  v.outcome0.resize(data.size());
  v.outcome1.resize(data.size());
  const auto fold = fold_assignment(data.size(), folds, derive_seed(config.seed, 3));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < data.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    const auto part = data.select(train);
    const auto prop = fit_propensity_with(part, propensity_family, config.propensity_clip);
    const auto out = fit_outcome_with(part, outcome_family, config.outcome_clip);
    for (auto i : test) {
      const auto& x = data.row(i).x;
      v.propensity[i] = prop.predict(x);
      v.outcome0[i] = out.predict(0, x);
      v.outcome1[i] = out.predict(1, x);
    }
  }
  return v;
}

}  // namespace fairaudit
