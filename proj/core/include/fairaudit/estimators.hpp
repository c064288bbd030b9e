#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fairaudit/dataset.hpp"
#include "fairaudit/models.hpp"
#include "fairaudit/weighted_sample.hpp"

namespace fairaudit {

enum class Estimator {
  unmatched,
  unmatched2,
  matched_euc,
  matched_euc2,
  matched_prop,
  matched_prop2,
  inverse_weighting,
  inverse_weighting2
};

std::string_view to_string(Estimator e);
Estimator estimator_from_string(std::string_view s);
/// The eight estimators in reporting order.
std::span<const Estimator> all_estimators();

enum class CiMethod { asymptotic, bootstrap };

std::string_view to_string(CiMethod m);
CiMethod ci_method_from_string(std::string_view s);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
  CiMethod method = CiMethod::asymptotic;
  /// Zero estimated standard error (e.g. all outcomes equal).
  bool degenerate = false;
};

struct AteEstimate {
  Estimator estimator = Estimator::unmatched;
  double value = 0.0;
  ConfidenceInterval ci;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::vector<std::string> warnings;
};

/// Two-sided standard normal quantile for `level`, e.g. 1.959964 at 0.95.
double normal_critical_value(double level);

/// mean(Y | Z = 1) - mean(Y | Z = 0) with the difference-of-proportions CI.
AteEstimate ate_unmatched(const ObservationalDataset& data, double level = 0.95);

/// Adjustment formula: mean over rows of m(1, x) - m(0, x). The attached CI
/// is the plug-in normal interval; the battery replaces it by a bootstrap
/// interval by default.
AteEstimate ate_adjusted(const ObservationalDataset& data, const OutcomeModel& outcome, double level = 0.95);
AteEstimate ate_adjusted(const ObservationalDataset& data, const NuisanceValues& nuisance, double level = 0.95);

/// Weighted difference of outcome means between the matched samples, CI from
/// effective sample sizes.
AteEstimate ate_matched(const WeightedSample& control, const WeightedSample& treated, double level = 0.95,
                        Estimator tag = Estimator::matched_euc);

/// Doubly robust (augmented inverse weighting) estimate, influence-function CI.
AteEstimate ate_ipw_dr(const ObservationalDataset& data, const OutcomeModel& outcome,
                       const PropensityModel& propensity, double level = 0.95);
AteEstimate ate_ipw_dr(const ObservationalDataset& data, const NuisanceValues& nuisance, double level = 0.95);

/// Horvitz-Thompson estimate, influence-function CI.
AteEstimate ate_ipw_ht(const ObservationalDataset& data, const PropensityModel& propensity, double level = 0.95);
AteEstimate ate_ipw_ht(const ObservationalDataset& data, std::span<const double> propensity, double level = 0.95);

enum class Verdict { evidence_of_unfairness, no_evidence };

std::string_view to_string(Verdict v);

/// No evidence iff the interval contains 0 (bounds included).
Verdict fairness_verdict(const ConfidenceInterval& ci);
inline Verdict fairness_verdict(const AteEstimate& estimate) { return fairness_verdict(estimate.ci); }

}  // namespace fairaudit
