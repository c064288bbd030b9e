#include "fairaudit/weighted_sample.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string_view>

#include "fairaudit/errors.hpp"
#include "fairaudit/random.hpp"

namespace fairaudit {

double WeightedSample::effective_size() const {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

bool WeightedSample::is_uniform(double tol) const {
  if (weights.empty()) return true;
  const double u = 1.0 / static_cast<double>(weights.size());
  return std::all_of(weights.begin(), weights.end(), [&](double w) { return std::abs(w - u) <= tol; });
}

void WeightedSample::validate() const {
  if (weights.size() != rows.size()) throw EstimationError("weight vector length differs from row count");
  if (source_index.size() != rows.size()) throw EstimationError("source index length differs from row count");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw EstimationError("weights must be finite and nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw EstimationError("weights must sum to one");
}

std::vector<double> normalize_weights(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) throw EstimationError("cannot normalize weights with zero total");
  for (auto& w : weights) w /= total;
  return weights;
}

WeightedSample uniform_sample(const ObservationalDataset& data) {
  WeightedSample s;
  s.schema = data.schema();
  s.rows = data.rows();
  s.weights.assign(data.size(), data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size()));
  s.source_index.resize(data.size());
  std::iota(s.source_index.begin(), s.source_index.end(), 0);
  return s;
}

WeightedSample uniform_group(const ObservationalDataset& data, int z) {
  WeightedSample s;
  s.schema = data.schema();
  s.source_index = data.group_indices(z);
  for (auto i : s.source_index) s.rows.push_back(data.row(i));
  s.weights.assign(s.rows.size(), s.rows.empty() ? 0.0 : 1.0 / static_cast<double>(s.rows.size()));
  return s;
}

WeightedSample systematic_resample(const WeightedSample& sample, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw EstimationError("resample size must be positive");
  const auto w = normalize_weights(sample.weights);
  Rng rng = make_rng(seed, 0x5e5);
  const double start = std::uniform_real_distribution<double>(0.0, 1.0)(rng) / static_cast<double>(size);
  WeightedSample out;
  out.schema = sample.schema;
  double cumulative = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < w.size() && k < size; ++i) {
    cumulative += w[i];
    while (k < size && start + static_cast<double>(k) / static_cast<double>(size) < cumulative) {
      out.rows.push_back(sample.rows[i]);
      out.source_index.push_back(sample.source_index[i]);
      ++k;
    }
  }
  // Rounding can leave the final point just past the cumulative total.
  for (std::size_t i = w.size(); k < size && i-- > 0;) {
    if (w[i] > 0) {
      while (k < size) {
        out.rows.push_back(sample.rows[i]);
        out.source_index.push_back(sample.source_index[i]);
        ++k;
      }
    }
  }
  out.weights.assign(out.rows.size(), 1.0 / static_cast<double>(out.rows.size()));
  return out;
}

WeightedSample support_sample(const WeightedSample& sample) {
  WeightedSample out;
  out.schema = sample.schema;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (sample.weights[i] <= 0.0) continue;
    out.rows.push_back(sample.rows[i]);
    out.source_index.push_back(sample.source_index[i]);
  }
  if (out.rows.empty()) throw EstimationError("sample has no positive weights");
  out.weights.assign(out.rows.size(), 1.0 / static_cast<double>(out.rows.size()));
  return out;
}

void save_weighted_sample(std::ostream& out, const WeightedSample& sample, char delimiter) {
  out << "y" << delimiter << "z";
  for (const auto& c : sample.schema.entries()) out << delimiter << c.name;
  out << delimiter << "weight\n";
  char buf[64];
  auto put = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    out << delimiter << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
  };
  for (std::size_t i = 0; i < sample.rows.size(); ++i) {
    out << sample.rows[i].y << delimiter << sample.rows[i].z;
    for (double v : sample.rows[i].x) put(v);
    put(sample.weights[i]);
    out << '\n';
  }
}

}  // namespace fairaudit
