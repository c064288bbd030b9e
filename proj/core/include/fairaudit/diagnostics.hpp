#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fairaudit/dataset.hpp"
#include "fairaudit/models.hpp"
#include "fairaudit/weighted_sample.hpp"

namespace fairaudit {

/// Rows x covariates, each column divided by its normalization scale when
/// `normalization` is given.
Eigen::MatrixXd feature_matrix(const WeightedSample& sample, std::span<const std::string> covariates,
                               const NormalizationSpec* normalization = nullptr);

// ---------------------------------------------------------------------------
// Weighted kernel density estimation

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
};

/// 0.9 min(sd, IQR / 1.34) n_eff^(-1/5) on the weighted sample; 0 when all
/// values coincide.
double silverman_bandwidth(std::span<const double> values, std::span<const double> weights);

/// Weighted Gaussian KDE evaluated on `grid`.
std::vector<double> weighted_kde(std::span<const double> values, std::span<const double> weights, double bandwidth,
                                 std::span<const double> grid);

/// Trapezoidal rule on a (not necessarily uniform) grid.
double trapezoid(std::span<const double> grid, std::span<const double> f);

// ---------------------------------------------------------------------------
// Total variation

inline constexpr std::size_t kTvGridSize = 512;

/// Half the L1 distance between the weighted marginals of `covariate`.
/// Binary covariates use frequencies; continuous ones KDEs on a shared grid.
/// A continuous covariate with a single distinct value per sample falls back
/// to frequencies and appends a warning.
double tv_marginal(const WeightedSample& sample0, const WeightedSample& sample1, std::string_view covariate,
                   CovariateKind kind, std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// Maximum mean discrepancy

/// Radial kernel exp(-sigma |s - t|^2); an empty sigma requests the median
/// heuristic.
struct KernelSpec {
  std::optional<double> sigma;
};

inline constexpr std::size_t kMedianHeuristicCap = 2000;

/// 1 / median squared pairwise distance over the pooled rows (seeded
/// subsample when more than `cap`).
double median_heuristic_sigma(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::uint64_t seed = 0,
                              std::size_t cap = kMedianHeuristicCap);

/// Biased (V-statistic) estimate of MMD^2.
double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double sigma);
/// Rejects non-uniform weights.
double mmd2(const WeightedSample& sample0, const WeightedSample& sample1, std::span<const std::string> covariates,
            const KernelSpec& kernel, const NormalizationSpec* normalization = nullptr, std::uint64_t seed = 0);

struct MmdTest {
  double statistic = 0.0;
  double threshold = 0.0;
  bool reject = false;
  double sigma = 0.0;
};

/// Permutation test over P pooled relabelings. The threshold is the
/// ceil((1 - level) P)-th smallest permuted statistic; reject iff the
/// observed statistic exceeds it.
MmdTest mmd_permutation_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& kernel,
                             double level, std::size_t permutations, std::uint64_t seed, int jobs = 1);

// ---------------------------------------------------------------------------
// Wasserstein

/// Square root of the optimal squared-Euclidean transport cost between two
/// weighted point clouds.
double w2(const Eigen::MatrixXd& a, std::span<const double> wa, const Eigen::MatrixXd& b, std::span<const double> wb);
double w2(const WeightedSample& sample0, const WeightedSample& sample1, std::span<const std::string> covariates,
          const NormalizationSpec* normalization = nullptr);

// ---------------------------------------------------------------------------
// Propensity densities

struct PropensityCurves {
  std::vector<double> grid;
  std::vector<double> density0;
  std::vector<double> density1;
};

/// Weighted KDE on [0, 1] with reflection at both ends, normalized to unit
/// trapezoidal integral.
DensityCurve unit_interval_density(std::span<const double> values, std::span<const double> weights,
                                   std::size_t grid_size = kTvGridSize);

PropensityCurves propensity_density_compare(const WeightedSample& sample0, const WeightedSample& sample1,
                                            const PropensityModel& propensity, std::size_t grid_size = kTvGridSize);

// ---------------------------------------------------------------------------
// Reports

/// Control weights proportional to 1 / (1 - e), treated to 1 / e.
std::pair<WeightedSample, WeightedSample> inverse_weighted_samples(const ObservationalDataset& data,
                                                                   std::span<const double> propensity);

struct BalanceConfig {
  /// Empty means every covariate of the samples.
  std::vector<std::string> covariates;
  KernelSpec kernel;
  double level = 0.05;
  /// 0 skips the permutation test.
  std::size_t permutations = 200;
  std::size_t grid_size = kTvGridSize;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct BalanceReport {
  std::vector<std::pair<std::string, double>> tv;
  /// Empty for weighted samples.
  std::optional<double> mmd2;
  std::optional<MmdTest> mmd_test;
  double w2 = 0.0;
  std::optional<PropensityCurves> propensity_curves;
  std::vector<std::string> warnings;
};

BalanceReport balance_report(const WeightedSample& sample0, const WeightedSample& sample1,
                             const BalanceConfig& config, const NormalizationSpec* normalization = nullptr,
                             const PropensityModel* propensity = nullptr);

nlohmann::json to_json(const BalanceReport& report);

}  // namespace fairaudit
