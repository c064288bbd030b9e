#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fairaudit/dataset.hpp"

namespace fairaudit {

/// Rows of one treatment group with nonnegative weights summing to one.
/// Zero-weight rows are retained.
struct WeightedSample {
  CovariateSchema schema;
  std::vector<Observation> rows;
  std::vector<double> weights;
  /// Row index in the dataset the sample was drawn from.
  std::vector<std::size_t> source_index;

  std::size_t size() const noexcept { return rows.size(); }
  double effective_size() const;
  bool is_uniform(double tol = 1e-12) const;
  /// Throws EstimationError if lengths differ, a weight is negative or the
  /// weights do not sum to one within 1e-9.
  void validate() const;
};

/// Uniform weights over every row of `data`.
WeightedSample uniform_sample(const ObservationalDataset& data);
/// Uniform weights over the rows of `data` with treatment `z`.
WeightedSample uniform_group(const ObservationalDataset& data, int z);

/// Divides by the total; throws if the total is not positive.
std::vector<double> normalize_weights(std::vector<double> weights);

/// Deterministic systematic resampling to `size` rows with uniform weights.
/// Used where an estimator only accepts unweighted samples.
WeightedSample systematic_resample(const WeightedSample& sample, std::size_t size, std::uint64_t seed);

/// Rows with positive weight, reweighted uniformly.
WeightedSample support_sample(const WeightedSample& sample);

/// Dataset tabular format with a trailing `weight` column.
void save_weighted_sample(std::ostream& out, const WeightedSample& sample, char delimiter = ',');

}  // namespace fairaudit
