#include <algorithm>
#include <numeric>

#include "fairaudit/errors.hpp"
#include "fairaudit/random.hpp"
#include "fairaudit/transport.hpp"

namespace fairaudit {

namespace {

// Seeded uniform subsample without replacement, returned in ascending order.
std::vector<std::size_t> cap_indices(std::vector<std::size_t> indices, std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || indices.size() <= cap) return indices;
  Rng rng(seed);
  for (std::size_t k = 0; k < cap; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, indices.size() - 1);
    std::swap(indices[k], indices[pick(rng)]);
  }
  indices.resize(cap);
  std::sort(indices.begin(), indices.end());
  return indices;
}

}  // namespace

MatchResult match_groups(const ObservationalDataset& data, const MatchConfig& config,
                         const NormalizationSpec* normalization, const PropensityModel* propensity) {
  data.require_both_groups();
  MatchResult result;
  result.control_rows = cap_indices(data.group_indices(0), config.max_per_side, derive_seed(config.seed, 10));
  result.treated_rows = cap_indices(data.group_indices(1), config.max_per_side, derive_seed(config.seed, 11));
  const auto g0 = data.select(result.control_rows);
  const auto g1 = data.select(result.treated_rows);

  CostMatrix cost;
  const bool euclidean = config.variant == MatchVariant::euclidean || config.variant == MatchVariant::euclidean2;
  if (euclidean) {
    if (normalization == nullptr) throw ConfigError("Euclidean matching needs a normalization");
    const auto covariates = config.covariates.empty() ? normalization->names() : config.covariates;
    std::vector<double> weights = config.weights;
    if (weights.empty()) weights.assign(covariates.size(), 1.0);
    cost = build_cost_euclidean(g0, g1, *normalization, covariates, weights);
  } else {
    if (propensity == nullptr) throw ConfigError("propensity matching needs a propensity model");
    cost = build_cost_propensity(g0, g1, *propensity);
  }

  result.plan = solve_trimmed_transport(cost, config.trim, config.solver);
  auto [control, treated] = matched_weighted_samples(result.plan, g0, g1);
  for (auto& i : control.source_index) i = result.control_rows[i];
  for (auto& j : treated.source_index) j = result.treated_rows[j];
  result.control = std::move(control);
  result.treated = std::move(treated);
  return result;
}

}  // namespace fairaudit
