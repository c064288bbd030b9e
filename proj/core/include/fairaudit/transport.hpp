#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"
#include "fairaudit/models.hpp"
#include "fairaudit/weighted_sample.hpp"

namespace fairaudit {

enum class CostKind { euclidean, propensity, custom };

/// Dense row-major n0 x n1 ground cost between control rows (i) and treated
/// rows (j). Entries are finite and nonnegative.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  CostKind kind = CostKind::custom;
  std::vector<double> weights;  // per-covariate, euclidean kind only

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  static CostMatrix from_values(std::size_t rows, std::size_t cols, std::vector<double> values);
  void validate() const;
};

/// C_ij = || w o (x0_i - x1_j) ||^2 on normalized covariates.
CostMatrix build_cost_euclidean(const ObservationalDataset& group0, const ObservationalDataset& group1,
                                const NormalizationSpec& normalization, std::span<const std::string> covariates,
                                std::span<const double> weights);

/// C_ij = |e(x0_i) - e(x1_j)|.
CostMatrix build_cost_propensity(const ObservationalDataset& group0, const ObservationalDataset& group1,
                                 const PropensityModel& model);

/// Fractions of control (alpha0) and treated (alpha1) mass that may be
/// discarded. Both lie in [0, 1).
struct TrimSpec {
  double alpha0 = 0.0;
  double alpha1 = 0.0;

  void validate() const;
  friend bool operator==(const TrimSpec&, const TrimSpec&) = default;
};

/// (n0 + 1) x (n1 + 1) coupling; the last row and column are the dummy
/// points that absorb trimmed mass.
struct TransportPlan {
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::vector<double> mass;  // row-major (n0 + 1) x (n1 + 1)
  TrimSpec trim;
  double objective = 0.0;
  std::size_t iterations = 0;

  double operator()(std::size_t i, std::size_t j) const { return mass[i * (n1 + 1) + j]; }
  double row_sum(std::size_t i) const;
  double col_sum(std::size_t j) const;
  double real_row_mass(std::size_t i) const;  // sum over real columns
  double real_col_mass(std::size_t j) const;  // sum over real rows
};

enum class TransportMethod { exact, entropic };

struct TransportOptions {
  TransportMethod method = TransportMethod::exact;
  /// Pivot cap for the exact solver; 0 picks a size-dependent default.
  std::size_t max_iterations = 0;
  /// Entropic path: regularization relative to the largest finite cost.
  double entropic_epsilon = 1e-3;
  double entropic_tolerance = 1e-9;
  std::size_t entropic_max_iterations = 100000;
};

struct TransportSolution {
  std::vector<double> flow;  // row-major rows x cols
  double objective = 0.0;
  std::size_t iterations = 0;
};

inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Balanced transportation problem with arbitrary nonnegative marginals.
/// Cells holding kForbidden carry no mass.
TransportSolution solve_transport(std::size_t rows, std::size_t cols, std::span<const double> cost,
                                  std::span<const double> supply, std::span<const double> demand,
                                  const TransportOptions& options = {});

/// Optimal trimmed coupling of the two uniform empirical measures.
TransportPlan solve_trimmed_transport(const CostMatrix& cost, const TrimSpec& trim,
                                      const TransportOptions& options = {});

/// Control/treated weights proportional to the mass each row sends to real
/// points of the other group.
std::pair<WeightedSample, WeightedSample> matched_weighted_samples(const TransportPlan& plan,
                                                                   const ObservationalDataset& group0,
                                                                   const ObservationalDataset& group1);

// ---------------------------------------------------------------------------
// Default trim levels and distance weights

enum class MatchVariant { euclidean, euclidean2, propensity, propensity2 };
enum class OutcomeKind { hospitalisation_death, death_in_hospital };

std::string_view to_string(MatchVariant v);
MatchVariant match_variant_from_string(std::string_view s);
std::string_view to_string(OutcomeKind k);
OutcomeKind outcome_kind_from_string(std::string_view s);

/// Trim fractions per (variant, outcome kind, period 1..4).
class TrimTable {
 public:
  /// Built-in defaults.
  TrimTable();
  /// Overrides from {"<outcome kind>": {"<variant>": [[a0, a1], ...4 periods]}}.
  static TrimTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  TrimSpec lookup(MatchVariant variant, OutcomeKind kind, int period) const;
  void set(MatchVariant variant, OutcomeKind kind, int period, TrimSpec trim);

 private:
  // [kind][variant][period - 1]
  TrimSpec table_[2][4][4];
};

TrimSpec default_trim_levels(MatchVariant variant, OutcomeKind kind, int period);

struct DistanceWeights {
  std::vector<std::string> covariates;
  std::vector<double> weights;
};

/// Per-covariate weights tuned for the in-hospital mortality cohort.
DistanceWeights in_hospital_distance_weights(int period);

// ---------------------------------------------------------------------------
// Matching pipeline

struct MatchConfig {
  MatchVariant variant = MatchVariant::euclidean;
  TrimSpec trim;
  /// Covariates entering the Euclidean cost (ignored for propensity costs).
  std::vector<std::string> covariates;
  /// Per-covariate weights; empty means all ones.
  std::vector<double> weights;
  /// Majority-group rows beyond this cap are subsampled (seeded).
  std::size_t max_per_side = 20000;
  std::uint64_t seed = 0;
  TransportOptions solver;
};

struct MatchResult {
  WeightedSample control;
  WeightedSample treated;
  TransportPlan plan;
  /// Control rows (dataset indices) that entered the problem.
  std::vector<std::size_t> control_rows;
  std::vector<std::size_t> treated_rows;
};

/// Splits `data` by treatment, builds the variant's cost and returns the
/// matched weighted samples indexed against `data`. Normalization is needed
/// for Euclidean variants, the propensity model for propensity variants.
MatchResult match_groups(const ObservationalDataset& data, const MatchConfig& config,
                         const NormalizationSpec* normalization, const PropensityModel* propensity);

}  // namespace fairaudit
