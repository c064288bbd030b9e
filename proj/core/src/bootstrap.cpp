#include "fairaudit/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "fairaudit/errors.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/random.hpp"

namespace fairaudit {

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw EstimationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ObservationalDataset canonical_order(const ObservationalDataset& data) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ra = data.row(a);
    const auto& rb = data.row(b);
    if (ra.z != rb.z) return ra.z < rb.z;
    if (ra.y != rb.y) return ra.y < rb.y;
    return ra.x < rb.x;
  });
  return data.select(order);
}

std::vector<std::size_t> stratified_resample(const ObservationalDataset& data, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(data.size());
  for (int z : {0, 1}) {
    const auto idx = data.group_indices(z);
    if (idx.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    for (std::size_t k = 0; k < idx.size(); ++k) out.push_back(idx[pick(rng)]);
  }
  return out;
}

BootstrapResult bootstrap_ci(const Statistic& statistic, const ObservationalDataset& data,
                             const BootstrapConfig& config) {
  if (config.replicates < 50) throw ConfigError("bootstrap needs at least 50 replicates");
  if (!(config.level > 0.0 && config.level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  const auto sorted_data = canonical_order(data);

  std::vector<std::optional<double>> slots(config.replicates);
  std::vector<std::string> errors(config.replicates);
  parallel_for(config.replicates, config.jobs, [&](std::size_t b) {
    try {
      const auto idx = stratified_resample(sorted_data, derive_seed(config.seed, b));
      const double v = statistic(sorted_data.select(idx));
      if (std::isfinite(v))
        slots[b] = v;
      else
        errors[b] = "non-finite statistic";
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });

  BootstrapResult result;
  for (std::size_t b = 0; b < slots.size(); ++b) {
    if (slots[b])
      result.values.push_back(*slots[b]);
    else
      ++result.failures;
  }
  if (static_cast<double>(result.failures) > 0.1 * static_cast<double>(config.replicates)) {
    std::string first;
    for (const auto& e : errors)
      if (!e.empty()) {
        first = e;
        break;
      }
    throw EstimationError(std::to_string(result.failures) + " of " + std::to_string(config.replicates) +
                          " bootstrap replicates failed (first: " + first + ")");
  }
  if (result.failures > 0)
    result.warnings.push_back(std::to_string(result.failures) + " bootstrap replicates failed and were dropped");

  auto sorted = result.values;
  std::sort(sorted.begin(), sorted.end());
  result.lo = sorted_quantile(sorted, (1.0 - config.level) / 2.0);
  result.hi = sorted_quantile(sorted, (1.0 + config.level) / 2.0);
  return result;
}

}  // namespace fairaudit
