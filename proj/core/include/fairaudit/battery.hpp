#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/estimators.hpp"
#include "fairaudit/models.hpp"
#include "fairaudit/transport.hpp"

namespace fairaudit {

/// Interval construction used unless overridden: bootstrap for Unmatched2,
/// asymptotic for the rest.
CiMethod default_ci_method(Estimator e);

/// Matching variant behind a matched estimator; throws for the others.
MatchVariant match_variant_of(Estimator e);
bool is_matched(Estimator e);

struct BatteryConfig {
  std::vector<Estimator> estimators{all_estimators().begin(), all_estimators().end()};
  /// Covariates used by every estimator; empty means the whole schema.
  std::vector<std::string> covariates;
  OutcomeKind outcome_kind = OutcomeKind::hospitalisation_death;
  /// Period 1..4 picks default trim levels; 0 requires explicit `trim`.
  int period = 1;
  std::map<MatchVariant, TrimSpec> trim;
  TrimTable trim_table;
  /// Euclidean matching weights; empty covariates means unit weights over
  /// all non-constant covariates.
  DistanceWeights distance_weights;
  NuisanceConfig nuisance;
  /// 0 evaluates nuisances in-sample, k >= 2 cross-fits with k folds.
  int cross_fit_folds = 0;
  std::map<Estimator, CiMethod> ci_methods;
  double level = 0.95;
  std::size_t bootstrap_replicates = 100;
  /// Refit nuisance models inside bootstrap replicates.
  bool bootstrap_refit = true;
  double majority_threshold = 0.6;
  std::size_t max_per_side = 20000;
  TransportOptions solver;
  std::uint64_t seed = 0;
  int jobs = 1;
  /// Fixed nuisance models; when set no fitting takes place.
  std::optional<PropensityModel> propensity;
  std::optional<OutcomeModel> outcome;

  TrimSpec trim_for(MatchVariant v) const;
  CiMethod ci_method_for(Estimator e) const;
};

struct VerdictSummary {
  std::size_t evidence = 0;
  std::size_t total = 0;
  double fraction = 0.0;
  double threshold = 0.6;
  /// Evidence when the fraction exceeds the threshold or every estimator
  /// shows evidence.
  Verdict majority = Verdict::no_evidence;
};

VerdictSummary summarize_verdicts(std::span<const AteEstimate> estimates, double threshold = 0.6);

struct BatteryReport {
  std::string outcome;
  std::string period;
  std::vector<AteEstimate> estimates;
  VerdictSummary summary;
  std::string propensity_family;
  std::string outcome_family;
  std::vector<std::string> warnings;
};

BatteryReport run_battery(const ObservationalDataset& data, const BatteryConfig& config);

nlohmann::json to_json(const AteEstimate& e);
nlohmann::json to_json(const VerdictSummary& s);
nlohmann::json to_json(const BatteryReport& r);

/// One CSV record per estimator:
/// outcome,period,estimator,value,lo,hi,level,method,n0,n1,verdict
void write_battery_records(std::ostream& out, std::span<const BatteryReport> reports);

/// Plot-ready table: one row per (outcome, estimator), one value/lo/hi column
/// triple per period.
void write_battery_plot_table(std::ostream& out, std::span<const BatteryReport> reports);

}  // namespace fairaudit
