#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

struct BootstrapConfig {
  std::size_t replicates = 100;
  double level = 0.95;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct BootstrapResult {
  double lo = 0.0;
  double hi = 0.0;
  /// Replicate values in replicate order; failed replicates are omitted.
  std::vector<double> values;
  std::size_t failures = 0;
  std::vector<std::string> warnings;
};

using Statistic = std::function<double(const ObservationalDataset&)>;

/// Linear-interpolation quantile (R type 7) of sorted values, q in [0, 1].
double sorted_quantile(const std::vector<double>& sorted, double q);

/// Rows sorted by (z, y, x) so resampling does not depend on input order.
ObservationalDataset canonical_order(const ObservationalDataset& data);

/// Row indices of one resample drawn with replacement within each z class.
std::vector<std::size_t> stratified_resample(const ObservationalDataset& data, std::uint64_t seed);

/// Percentile interval over stratified resamples. Replicate b uses seed
/// derive_seed(config.seed, b). Throws EstimationError when more than 10% of
/// replicates fail and ConfigError when fewer than 50 are requested.
BootstrapResult bootstrap_ci(const Statistic& statistic, const ObservationalDataset& data,
                             const BootstrapConfig& config);

}  // namespace fairaudit
