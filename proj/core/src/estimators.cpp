#include "fairaudit/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "fairaudit/errors.hpp"

namespace fairaudit {

namespace {

constexpr std::array<Estimator, 8> kAll = {Estimator::unmatched,         Estimator::unmatched2,
                                           Estimator::matched_euc,       Estimator::matched_euc2,
                                           Estimator::matched_prop,      Estimator::matched_prop2,
                                           Estimator::inverse_weighting, Estimator::inverse_weighting2};

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
}

ConfidenceInterval normal_interval(double value, double se, double level) {
  const double half = normal_critical_value(level) * se;
  ConfidenceInterval ci;
  ci.level = level;
  ci.method = CiMethod::asymptotic;
  ci.lo = clamp_unit(value - half);
  ci.hi = clamp_unit(value + half);
  ci.degenerate = !(se > 0.0);
  return ci;
}

// Mean and standard error of the mean of per-row contributions.
std::pair<double, double> mean_and_se(const std::vector<double>& phi) {
  const double n = static_cast<double>(phi.size());
  double mean = 0.0;
  for (double v : phi) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : phi) ss += (v - mean) * (v - mean);
  const double var = phi.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

void check_nuisance(const ObservationalDataset& data, const NuisanceValues& nuisance, bool need_propensity,
                    bool need_outcome) {
  if (need_propensity) {
    if (nuisance.propensity.size() != data.size()) throw EstimationError("propensity vector length mismatch");
    for (double e : nuisance.propensity)
      if (!(e > 0.0 && e < 1.0)) throw EstimationError("propensity values must be clipped away from 0 and 1");
  }
  if (need_outcome && (nuisance.outcome0.size() != data.size() || nuisance.outcome1.size() != data.size()))
    throw EstimationError("outcome prediction length mismatch");
}

AteEstimate from_contributions(Estimator tag, const ObservationalDataset& data, const std::vector<double>& phi,
                               double level) {
  const auto [mean, se] = mean_and_se(phi);
  AteEstimate est;
  est.estimator = tag;
  est.value = clamp_unit(mean);
  est.ci = normal_interval(est.value, se, level);
  est.n0 = data.control_count();
  est.n1 = data.treated_count();
  if (mean != est.value) est.warnings.push_back("estimate clamped to [-1, 1]");
  return est;
}

NuisanceValues outcome_values(const ObservationalDataset& data, const OutcomeModel& outcome) {
  NuisanceValues v;
  v.outcome0.reserve(data.size());
  v.outcome1.reserve(data.size());
  for (const auto& r : data.rows()) {
    v.outcome0.push_back(outcome.predict(0, r.x));
    v.outcome1.push_back(outcome.predict(1, r.x));
  }
  return v;
}

}  // namespace

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::unmatched: return "Unmatched";
    case Estimator::unmatched2: return "Unmatched2";
    case Estimator::matched_euc: return "MatchedEuc";
    case Estimator::matched_euc2: return "MatchedEuc2";
    case Estimator::matched_prop: return "MatchedProp";
    case Estimator::matched_prop2: return "MatchedProp2";
    case Estimator::inverse_weighting: return "InverseWeighting";
    case Estimator::inverse_weighting2: return "InverseWeighting2";
  }
  return "?";
}

Estimator estimator_from_string(std::string_view s) {
  for (auto e : kAll)
    if (to_string(e) == s) return e;
  throw ConfigError("unknown estimator '" + std::string(s) + "'");
}

std::span<const Estimator> all_estimators() { return kAll; }

std::string_view to_string(CiMethod m) { return m == CiMethod::asymptotic ? "asymptotic" : "bootstrap"; }

CiMethod ci_method_from_string(std::string_view s) {
  if (s == "asymptotic") return CiMethod::asymptotic;
  if (s == "bootstrap") return CiMethod::bootstrap;
  throw ConfigError("unknown CI method '" + std::string(s) + "'");
}

double normal_critical_value(double level) {
  check_level(level);
  return boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
}

AteEstimate ate_unmatched(const ObservationalDataset& data, double level) {
  check_level(level);
  data.require_both_groups();
  double s0 = 0.0, s1 = 0.0;
  for (const auto& r : data.rows()) (r.z == 1 ? s1 : s0) += r.y;
  const double n0 = static_cast<double>(data.control_count());
  const double n1 = static_cast<double>(data.treated_count());
  const double p0 = s0 / n0, p1 = s1 / n1;
  AteEstimate est;
  est.estimator = Estimator::unmatched;
  est.value = p1 - p0;
  est.ci = normal_interval(est.value, std::sqrt(p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0), level);
  est.n0 = data.control_count();
  est.n1 = data.treated_count();
  return est;
}

AteEstimate ate_adjusted(const ObservationalDataset& data, const NuisanceValues& nuisance, double level) {
  check_level(level);
  if (data.empty()) throw DataError("empty dataset");
  check_nuisance(data, nuisance, false, true);
  std::vector<double> phi(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) phi[i] = nuisance.outcome1[i] - nuisance.outcome0[i];
  return from_contributions(Estimator::unmatched2, data, phi, level);
}

AteEstimate ate_adjusted(const ObservationalDataset& data, const OutcomeModel& outcome, double level) {
  return ate_adjusted(data, outcome_values(data, outcome), level);
}

AteEstimate ate_matched(const WeightedSample& control, const WeightedSample& treated, double level,
                        Estimator tag) {
  check_level(level);
  control.validate();
  treated.validate();
  auto weighted_mean = [](const WeightedSample& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) m += s.weights[i] * s.rows[i].y;
    return m;
  };
  const double ne0 = control.effective_size(), ne1 = treated.effective_size();
  if (!(ne0 > 0.0) || !(ne1 > 0.0)) throw EstimationError("matched sample has zero effective size");
  const double p0 = weighted_mean(control), p1 = weighted_mean(treated);
  AteEstimate est;
  est.estimator = tag;
  est.value = clamp_unit(p1 - p0);
  const double se = std::sqrt(std::max(0.0, p1 * (1.0 - p1)) / ne1 + std::max(0.0, p0 * (1.0 - p0)) / ne0);
  est.ci = normal_interval(est.value, se, level);
  auto positive = [](const WeightedSample& s) {
    return static_cast<std::size_t>(std::count_if(s.weights.begin(), s.weights.end(), [](double w) { return w > 0; }));
  };
  est.n0 = positive(control);
  est.n1 = positive(treated);
  if (est.ci.degenerate) est.warnings.push_back("degenerate interval: zero standard error");
  return est;
}

AteEstimate ate_ipw_dr(const ObservationalDataset& data, const NuisanceValues& nuisance, double level) {
  check_level(level);
  data.require_both_groups();
  check_nuisance(data, nuisance, true, true);
  std::vector<double> phi(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.row(i);
    const double e = nuisance.propensity[i], m0 = nuisance.outcome0[i], m1 = nuisance.outcome1[i];
    phi[i] = m1 - m0 + r.z * (r.y - m1) / e - (1 - r.z) * (r.y - m0) / (1.0 - e);
  }
  return from_contributions(Estimator::inverse_weighting, data, phi, level);
}

AteEstimate ate_ipw_dr(const ObservationalDataset& data, const OutcomeModel& outcome,
                       const PropensityModel& propensity, double level) {
  auto nuisance = outcome_values(data, outcome);
  nuisance.propensity = propensity.predict_all(data);
  return ate_ipw_dr(data, nuisance, level);
}

AteEstimate ate_ipw_ht(const ObservationalDataset& data, std::span<const double> propensity, double level) {
  check_level(level);
  data.require_both_groups();
  NuisanceValues nuisance;
  nuisance.propensity.assign(propensity.begin(), propensity.end());
  check_nuisance(data, nuisance, true, false);
  std::vector<double> phi(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data.row(i);
    const double e = propensity[i];
    phi[i] = r.z * r.y / e - (1 - r.z) * r.y / (1.0 - e);
  }
  return from_contributions(Estimator::inverse_weighting2, data, phi, level);
}

AteEstimate ate_ipw_ht(const ObservationalDataset& data, const PropensityModel& propensity, double level) {
  const auto e = propensity.predict_all(data);
  return ate_ipw_ht(data, e, level);
}

std::string_view to_string(Verdict v) {
  return v == Verdict::evidence_of_unfairness ? "evidence-of-unfairness" : "no-evidence";
}

Verdict fairness_verdict(const ConfidenceInterval& ci) {
  return (ci.lo <= 0.0 && 0.0 <= ci.hi) ? Verdict::no_evidence : Verdict::evidence_of_unfairness;
}

}  // namespace fairaudit
