// Gradient boosting of depth-1 regression trees on the logistic loss.
// Splits are chosen by least squares on the negative gradient; leaf values
// take a single Newton step on the loss.

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairaudit/errors.hpp"
#include "fairaudit/models.hpp"
#include "fairaudit/random.hpp"

namespace fairaudit {

namespace {

constexpr double kMaxLeafStep = 10.0;

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double newton_step(double g, double h) {
  return std::clamp(g / std::max(h, 1e-12), -kMaxLeafStep, kMaxLeafStep);
}

}  // namespace

BoostedStumpsModel::BoostedStumpsModel(std::size_t feature_count, double base_score, std::vector<Stump> stumps,
                                       BoostedConfig config)
    : feature_count_(feature_count), base_score_(base_score), stumps_(std::move(stumps)), config_(config) {}

double BoostedStumpsModel::score(std::span<const double> x) const {
  double f = base_score_;
  for (const auto& s : stumps_) f += config_.learning_rate * s(x);
  return f;
}

double BoostedStumpsModel::predict_probability(std::span<const double> x) const {
  return clamp_probability(sigmoid(score(x)));
}

nlohmann::json BoostedStumpsModel::to_json() const {
  nlohmann::json stumps = nlohmann::json::array();
  for (const auto& s : stumps_) stumps.push_back({s.feature, s.threshold, s.left, s.right});
  return {{"family", "boosted"},
          {"config", fairaudit::to_json(ModelConfig{config_})},
          {"feature_count", feature_count_},
          {"base_score", base_score_},
          {"stumps", std::move(stumps)}};
}

std::shared_ptr<const BoostedStumpsModel> fit_boosted_stumps(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                             const Eigen::VectorXd& w,
                                                             const BoostedConfig& config) {
  if (x.rows() != y.size() || y.size() != w.size()) throw EstimationError("feature/label/weight lengths differ");
  if (config.rounds < 1 || !(config.learning_rate > 0.0)) throw ConfigError("invalid boosting configuration");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  {
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i)
      if (w[static_cast<Eigen::Index>(i)] > 0) (y[static_cast<Eigen::Index>(i)] == 1.0 ? has1 : has0) = true;
    if (!has0 || !has1) throw EstimationError("fitting requires both label values to be present");
  }

  std::vector<std::vector<std::size_t>> order(p);
  for (std::size_t k = 0; k < p; ++k) {
    auto& o = order[k];
    o.resize(n);
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
      return x(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(k)) <
             x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k));
    });
  }

  const double ybar = std::clamp(y.dot(w) / w.sum(), 1e-6, 1.0 - 1e-6);
  const double base = std::log(ybar / (1.0 - ybar));
  std::vector<double> score(n, base);
  std::vector<double> g(n), h(n), wr(n);
  std::vector<Stump> stumps;
  stumps.reserve(static_cast<std::size_t>(config.rounds));

  for (int round = 0; round < config.rounds; ++round) {
    std::fill(wr.begin(), wr.end(), 0.0);
    if (config.subsample < 1.0) {
      Rng rng = make_rng(config.seed, static_cast<std::uint64_t>(round));
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      const auto take = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(config.subsample * n)));
      for (std::size_t i = 0; i < std::min(take, n); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(idx[i], idx[pick(rng)]);
        wr[idx[i]] = w[static_cast<Eigen::Index>(idx[i])];
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) wr[i] = w[static_cast<Eigen::Index>(i)];
    }

    double G = 0, W = 0, H = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = sigmoid(score[i]);
      g[i] = y[static_cast<Eigen::Index>(i)] - prob;
      h[i] = prob * (1.0 - prob);
      G += wr[i] * g[i];
      W += wr[i];
      H += wr[i] * h[i];
    }
    if (!(W > 0)) break;

    Stump best;
    best.left = newton_step(G, H);
    double best_gain = 1e-14 * (1.0 + G * G / W);
    for (std::size_t k = 0; k < p; ++k) {
      const auto& o = order[k];
      const auto col = static_cast<Eigen::Index>(k);
      double gl = 0, wl = 0;
      for (std::size_t r = 0; r + 1 < n; ++r) {
        const std::size_t i = o[r];
        gl += wr[i] * g[i];
        wl += wr[i];
        const double v = x(static_cast<Eigen::Index>(i), col);
        const double next = x(static_cast<Eigen::Index>(o[r + 1]), col);
        if (!(next > v)) continue;
        const double wrt = W - wl;
        if (wl <= 0 || wrt <= 0) continue;
        const double grt = G - gl;
        const double gain = gl * gl / wl + grt * grt / wrt - G * G / W;
        if (gain > best_gain) {
          best_gain = gain;
          best.feature = static_cast<int>(k);
          best.threshold = v + 0.5 * (next - v);
        }
      }
    }
    if (best.feature >= 0) {
      double gl = 0, hl = 0, gr = 0, hr = 0;
      const auto col = static_cast<Eigen::Index>(best.feature);
      for (std::size_t i = 0; i < n; ++i) {
        if (x(static_cast<Eigen::Index>(i), col) <= best.threshold) {
          gl += wr[i] * g[i];
          hl += wr[i] * h[i];
        } else {
          gr += wr[i] * g[i];
          hr += wr[i] * h[i];
        }
      }
      best.left = newton_step(gl, hl);
      best.right = newton_step(gr, hr);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double leaf = best.left;
      if (best.feature >= 0 && x(static_cast<Eigen::Index>(i), best.feature) > best.threshold) leaf = best.right;
      score[i] += config.learning_rate * leaf;
    }
    stumps.push_back(best);
  }
  return std::make_shared<const BoostedStumpsModel>(p, base, std::move(stumps), config);
}

}  // namespace fairaudit
