#include "fairaudit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "fairaudit/errors.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/random.hpp"
#include "fairaudit/transport.hpp"

namespace fairaudit {

Eigen::MatrixXd feature_matrix(const WeightedSample& sample, std::span<const std::string> covariates,
                               const NormalizationSpec* normalization) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(sample.size()), static_cast<Eigen::Index>(covariates.size()));
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    const auto col = sample.schema.index_of(covariates[k]);
    double scale = 1.0;
    if (normalization != nullptr) {
      const auto s = normalization->scale_of(covariates[k]);
      if (!s) throw ConfigError("normalization lacks covariate '" + covariates[k] + "'");
      scale = *s;
    }
    for (std::size_t i = 0; i < sample.size(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sample.rows[i].x[col] / scale;
  }
  return m;
}

namespace {

std::vector<double> normalized(std::span<const double> w) {
  return normalize_weights(std::vector<double>(w.begin(), w.end()));
}

double weighted_quantile(std::span<const double> values, const std::vector<double>& w, double q) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double cum = 0.0;
  for (auto i : order) {
    cum += w[i];
    if (cum >= q) return values[i];
  }
  return values[order.back()];
}

std::vector<double> column_of(const WeightedSample& s, std::size_t col) {
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = s.rows[i].x[col];
  return v;
}

double discrete_tv(std::span<const double> v0, const std::vector<double>& w0, std::span<const double> v1,
                   const std::vector<double>& w1) {
  std::map<double, double> diff;
  for (std::size_t i = 0; i < v0.size(); ++i) diff[v0[i]] += w0[i];
  for (std::size_t i = 0; i < v1.size(); ++i) diff[v1[i]] -= w1[i];
  double s = 0.0;
  for (const auto& [v, d] : diff) s += std::abs(d);
  return std::clamp(0.5 * s, 0.0, 1.0);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k)
    g[k] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

}  // namespace

double silverman_bandwidth(std::span<const double> values, std::span<const double> weights) {
  if (values.empty()) return 0.0;
  const auto w = normalized(weights);
  double mean = 0.0, w2sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    mean += w[i] * values[i];
    w2sum += w[i] * w[i];
  }
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) var += w[i] * (values[i] - mean) * (values[i] - mean);
  const double sd = std::sqrt(var);
  const double iqr = weighted_quantile(values, w, 0.75) - weighted_quantile(values, w, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  const double n_eff = 1.0 / w2sum;
  return 0.9 * spread * std::pow(n_eff, -0.2);
}

std::vector<double> weighted_kde(std::span<const double> values, std::span<const double> weights, double bandwidth,
                                 std::span<const double> grid) {
  if (!(bandwidth > 0.0)) throw EstimationError("kernel bandwidth must be positive");
  const auto w = normalized(weights);
  const double norm = 1.0 / (bandwidth * std::sqrt(2.0 * std::numbers::pi));
  std::vector<double> f(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double u = (grid[k] - values[i]) / bandwidth;
      s += w[i] * std::exp(-0.5 * u * u);
    }
    f[k] = s * norm;
  }
  return f;
}

double trapezoid(std::span<const double> grid, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) s += 0.5 * (f[k] + f[k - 1]) * (grid[k] - grid[k - 1]);
  return s;
}

double tv_marginal(const WeightedSample& sample0, const WeightedSample& sample1, std::string_view covariate,
                   CovariateKind kind, std::vector<std::string>* warnings) {
  if (sample0.size() == 0 || sample1.size() == 0) throw EstimationError("total variation needs nonempty samples");
  const auto c0 = sample0.schema.index_of(covariate);
  const auto c1 = sample1.schema.index_of(covariate);
  const auto v0 = column_of(sample0, c0), v1 = column_of(sample1, c1);
  const auto w0 = normalized(sample0.weights), w1 = normalized(sample1.weights);
  if (kind == CovariateKind::binary) return discrete_tv(v0, w0, v1, w1);

  const double h0 = silverman_bandwidth(v0, w0), h1 = silverman_bandwidth(v1, w1);
  if (!(h0 > 0.0) || !(h1 > 0.0)) {
    if (warnings)
      warnings->push_back("covariate '" + std::string(covariate) +
                          "' has a degenerate bandwidth; total variation computed from frequencies");
    return discrete_tv(v0, w0, v1, w1);
  }
  const double h = std::max(h0, h1);
  const auto [min0, max0] = std::minmax_element(v0.begin(), v0.end());
  const auto [min1, max1] = std::minmax_element(v1.begin(), v1.end());
  const auto grid = linspace(std::min(*min0, *min1) - 3.0 * h, std::max(*max0, *max1) + 3.0 * h, kTvGridSize);
  const auto f0 = weighted_kde(v0, w0, h0, grid);
  const auto f1 = weighted_kde(v1, w1, h1, grid);
  std::vector<double> d(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) d[k] = std::abs(f0[k] - f1[k]);
  return std::clamp(0.5 * trapezoid(grid, d), 0.0, 1.0);
}

namespace {

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    const double d = a(i, k) - b(j, k);
    s += d * d;
  }
  return s;
}

double kernel_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) s += std::exp(-sigma * squared_distance(a, i, b, j));
  return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd z(a.rows() + b.rows(), a.cols());
  z << a, b;
  return z;
}

}  // namespace

double median_heuristic_sigma(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed,
                              std::size_t cap) {
  const Eigen::MatrixXd pooled = stack(a, b);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > cap) {
    Rng rng = make_rng(seed, 0x6d6d64);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<double> d;
  d.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j) d.push_back(squared_distance(pooled, idx[i], pooled, idx[j]));
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double median = d[mid];
  if (d.size() % 2 == 0) {
    const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  if (!(median > 0.0)) {
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : d)
      if (v > 0.0) {
        sum += v;
        ++count;
      }
    median = count > 0 ? sum / static_cast<double>(count) : 1.0;
  }
  return 1.0 / median;
}

double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
  if (a.rows() < 1 || b.rows() < 1) throw EstimationError("MMD needs nonempty samples");
  if (a.cols() != b.cols()) throw EstimationError("MMD samples have different dimensions");
  const double v = kernel_mean(a, a, sigma) + kernel_mean(b, b, sigma) - 2.0 * kernel_mean(a, b, sigma);
  return std::max(0.0, v);
}

double mmd2(const WeightedSample& sample0, const WeightedSample& sample1, std::span<const std::string> covariates,
            const KernelSpec& kernel, const NormalizationSpec* normalization, std::uint64_t seed) {
  if (!sample0.is_uniform(1e-9) || !sample1.is_uniform(1e-9))
    throw EstimationError("MMD is only defined for unweighted samples; use w2 for weighted ones");
  const auto a = feature_matrix(sample0, covariates, normalization);
  const auto b = feature_matrix(sample1, covariates, normalization);
  const double sigma = kernel.sigma ? *kernel.sigma : median_heuristic_sigma(a, b, seed);
  return mmd2(a, b, sigma);
}

MmdTest mmd_permutation_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& kernel,
                             double level, std::size_t permutations, std::uint64_t seed, int jobs) {
  if (permutations < 100) throw ConfigError("the permutation test needs at least 100 permutations");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("test level must lie in (0, 1)");
  if (a.rows() < 2 || b.rows() < 2) throw EstimationError("MMD test needs at least two rows per sample");
  MmdTest test;
  test.sigma = kernel.sigma ? *kernel.sigma : median_heuristic_sigma(a, b, seed);
  if (!(test.sigma > 0.0)) throw ConfigError("kernel sigma must be positive");

  const Eigen::MatrixXd pooled = stack(a, b);
  const Eigen::Index n = pooled.rows(), m = a.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) k(i, j) = k(j, i) = std::exp(-test.sigma * squared_distance(pooled, i, pooled, j));
  }
  const double ca = 1.0 / static_cast<double>(m), cb = -1.0 / static_cast<double>(n - m);
  auto statistic = [&](const std::vector<Eigen::Index>& order) {
    Eigen::VectorXd c(n);
    for (Eigen::Index p = 0; p < n; ++p) c(order[static_cast<std::size_t>(p)]) = p < m ? ca : cb;
    return std::max(0.0, c.dot(k * c));
  };
  std::vector<Eigen::Index> identity(static_cast<std::size_t>(n));
  std::iota(identity.begin(), identity.end(), 0);
  test.statistic = statistic(identity);

  std::vector<double> null(permutations);
  parallel_for(permutations, jobs, [&](std::size_t p) {
    auto order = identity;
    Rng rng = make_rng(seed, p + 1);
    std::shuffle(order.begin(), order.end(), rng);
    null[p] = statistic(order);
  });
  std::sort(null.begin(), null.end());
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - level) * static_cast<double>(permutations) - 1e-9));
  test.threshold = null[std::clamp<std::size_t>(rank, 1, permutations) - 1];
  test.reject = test.statistic > test.threshold;
  return test;
}

double w2(const Eigen::MatrixXd& a, std::span<const double> wa, const Eigen::MatrixXd& b,
          std::span<const double> wb) {
  if (a.cols() != b.cols()) throw EstimationError("W2 samples have different dimensions");
  if (static_cast<std::size_t>(a.rows()) != wa.size() || static_cast<std::size_t>(b.rows()) != wb.size())
    throw EstimationError("W2 weight length mismatch");
  const auto na = normalized(wa), nb = normalized(wb);
  std::vector<Eigen::Index> ia, ib;
  std::vector<double> supply, demand;
  for (std::size_t i = 0; i < na.size(); ++i)
    if (na[i] > 0.0) {
      ia.push_back(static_cast<Eigen::Index>(i));
      supply.push_back(na[i]);
    }
  for (std::size_t j = 0; j < nb.size(); ++j)
    if (nb[j] > 0.0) {
      ib.push_back(static_cast<Eigen::Index>(j));
      demand.push_back(nb[j]);
    }
  std::vector<double> cost(ia.size() * ib.size());
  for (std::size_t i = 0; i < ia.size(); ++i)
    for (std::size_t j = 0; j < ib.size(); ++j) cost[i * ib.size() + j] = squared_distance(a, ia[i], b, ib[j]);
  const auto sol = solve_transport(ia.size(), ib.size(), cost, supply, demand);
  return std::sqrt(std::max(0.0, sol.objective));
}

double w2(const WeightedSample& sample0, const WeightedSample& sample1, std::span<const std::string> covariates,
          const NormalizationSpec* normalization) {
  return w2(feature_matrix(sample0, covariates, normalization), sample0.weights,
            feature_matrix(sample1, covariates, normalization), sample1.weights);
}

DensityCurve unit_interval_density(std::span<const double> values, std::span<const double> weights,
                                   std::size_t grid_size) {
  if (values.empty()) throw EstimationError("density of an empty sample");
  if (grid_size < 2) throw ConfigError("density grid needs at least two points");
  const auto w = normalized(weights);
  double h = silverman_bandwidth(values, w);
  if (!(h > 0.0)) h = 0.01;
  DensityCurve curve;
  curve.grid = linspace(0.0, 1.0, grid_size);
  curve.density.assign(grid_size, 0.0);
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double t = curve.grid[k];
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (double c : {values[i], -values[i], 2.0 - values[i]}) {
        const double u = (t - c) / h;
        s += w[i] * std::exp(-0.5 * u * u);
      }
    }
    curve.density[k] = s * norm;
  }
  const double area = trapezoid(curve.grid, curve.density);
  if (area > 0.0)
    for (auto& f : curve.density) f /= area;
  return curve;
}

PropensityCurves propensity_density_compare(const WeightedSample& sample0, const WeightedSample& sample1,
                                            const PropensityModel& propensity, std::size_t grid_size) {
  auto scores = [&](const WeightedSample& s) {
    std::vector<double> e(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) e[i] = propensity.predict(s.rows[i].x);
    return e;
  };
  const auto d0 = unit_interval_density(scores(sample0), sample0.weights, grid_size);
  const auto d1 = unit_interval_density(scores(sample1), sample1.weights, grid_size);
  return {d0.grid, d0.density, d1.density};
}

std::pair<WeightedSample, WeightedSample> inverse_weighted_samples(const ObservationalDataset& data,
                                                                   std::span<const double> propensity) {
  if (propensity.size() != data.size()) throw EstimationError("propensity vector length mismatch");
  data.require_both_groups();
  WeightedSample s0, s1;
  s0.schema = s1.schema = data.schema();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = propensity[i];
    if (!(e > 0.0 && e < 1.0)) throw EstimationError("propensity values must be clipped away from 0 and 1");
    auto& s = data.row(i).z == 1 ? s1 : s0;
    s.rows.push_back(data.row(i));
    s.source_index.push_back(i);
    s.weights.push_back(data.row(i).z == 1 ? 1.0 / e : 1.0 / (1.0 - e));
  }
  s0.weights = normalize_weights(std::move(s0.weights));
  s1.weights = normalize_weights(std::move(s1.weights));
  return {std::move(s0), std::move(s1)};
}

BalanceReport balance_report(const WeightedSample& sample0, const WeightedSample& sample1,
                             const BalanceConfig& config, const NormalizationSpec* normalization,
                             const PropensityModel* propensity) {
  BalanceReport report;
  const auto covariates = config.covariates.empty() ? sample0.schema.names() : config.covariates;
  for (const auto& c : covariates) {
    const auto kind = sample0.schema[sample0.schema.index_of(c)].kind;
    report.tv.emplace_back(c, tv_marginal(sample0, sample1, c, kind, &report.warnings));
  }
  const auto a = feature_matrix(sample0, covariates, normalization);
  const auto b = feature_matrix(sample1, covariates, normalization);
  if (sample0.is_uniform(1e-9) && sample1.is_uniform(1e-9)) {
    const double sigma = config.kernel.sigma ? *config.kernel.sigma : median_heuristic_sigma(a, b, config.seed);
    report.mmd2 = mmd2(a, b, sigma);
    if (config.permutations > 0)
      report.mmd_test = mmd_permutation_test(a, b, KernelSpec{sigma}, config.level, config.permutations,
                                             derive_seed(config.seed, 1), config.jobs);
  }
  report.w2 = w2(a, sample0.weights, b, sample1.weights);
  if (propensity != nullptr)
    report.propensity_curves = propensity_density_compare(sample0, sample1, *propensity, config.grid_size);
  return report;
}

nlohmann::json to_json(const BalanceReport& report) {
  nlohmann::json j;
  j["tv"] = nlohmann::json::object();
  for (const auto& [name, v] : report.tv) j["tv"][name] = v;
  j["mmd2"] = report.mmd2 ? nlohmann::json(*report.mmd2) : nlohmann::json(nullptr);
  if (report.mmd_test)
    j["mmd_test"] = {{"statistic", report.mmd_test->statistic},
                     {"threshold", report.mmd_test->threshold},
                     {"reject", report.mmd_test->reject},
                     {"sigma", report.mmd_test->sigma}};
  j["w2"] = report.w2;
  if (!report.warnings.empty()) j["warnings"] = report.warnings;
  return j;
}

}  // namespace fairaudit
