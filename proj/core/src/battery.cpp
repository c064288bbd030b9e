#include "fairaudit/battery.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <set>

#include "fairaudit/bootstrap.hpp"
#include "fairaudit/errors.hpp"
#include "fairaudit/random.hpp"
#include "fairaudit/report.hpp"

namespace fairaudit {

CiMethod default_ci_method(Estimator e) {
  return e == Estimator::unmatched2 ? CiMethod::bootstrap : CiMethod::asymptotic;
}

bool is_matched(Estimator e) {
  return e == Estimator::matched_euc || e == Estimator::matched_euc2 || e == Estimator::matched_prop ||
         e == Estimator::matched_prop2;
}

MatchVariant match_variant_of(Estimator e) {
  switch (e) {
    case Estimator::matched_euc: return MatchVariant::euclidean;
    case Estimator::matched_euc2: return MatchVariant::euclidean2;
    case Estimator::matched_prop: return MatchVariant::propensity;
    case Estimator::matched_prop2: return MatchVariant::propensity2;
    default: throw ConfigError(std::string(to_string(e)) + " is not a matched estimator");
  }
}

TrimSpec BatteryConfig::trim_for(MatchVariant v) const {
  if (auto it = trim.find(v); it != trim.end()) return it->second;
  if (period < 1 || period > 4)
    throw ConfigError("no trim level for " + std::string(to_string(v)) + " (period outside 1..4 and no override)");
  return trim_table.lookup(v, outcome_kind, period);
}

CiMethod BatteryConfig::ci_method_for(Estimator e) const {
  if (auto it = ci_methods.find(e); it != ci_methods.end()) return it->second;
  return default_ci_method(e);
}

VerdictSummary summarize_verdicts(std::span<const AteEstimate> estimates, double threshold) {
  VerdictSummary s;
  s.threshold = threshold;
  s.total = estimates.size();
  for (const auto& e : estimates)
    if (fairness_verdict(e) == Verdict::evidence_of_unfairness) ++s.evidence;
  s.fraction = s.total > 0 ? static_cast<double>(s.evidence) / static_cast<double>(s.total) : 0.0;
  const bool all = s.total > 0 && s.evidence == s.total;
  s.majority = (all || s.fraction > threshold) ? Verdict::evidence_of_unfairness : Verdict::no_evidence;
  return s;
}

namespace {

bool needs_propensity(Estimator e) {
  return e == Estimator::matched_prop || e == Estimator::matched_prop2 || e == Estimator::inverse_weighting ||
         e == Estimator::inverse_weighting2;
}

bool needs_outcome(Estimator e) { return e == Estimator::unmatched2 || e == Estimator::inverse_weighting; }

bool is_constant(const ObservationalDataset& data, std::size_t column) {
  const auto v = data.column(column);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return v.empty() || *lo == *hi;
}

class Pipeline {
 public:
  Pipeline(const ObservationalDataset& data, const BatteryConfig& config) : config_(config) {
    const auto& names =
        config.distance_weights.covariates.empty() ? data.schema().names() : config.distance_weights.covariates;
    for (std::size_t k = 0; k < names.size(); ++k) {
      const auto idx = data.schema().find(names[k]);
      if (!idx) throw ConfigError("distance weight covariate '" + names[k] + "' is not in the dataset");
      if (is_constant(data, *idx)) {
        warnings_.push_back("covariate '" + names[k] + "' is constant and left out of Euclidean matching");
        continue;
      }
      match_covariates_.push_back(names[k]);
      match_weights_.push_back(config.distance_weights.covariates.empty() ? 1.0 : config.distance_weights.weights[k]);
    }
  }

  std::vector<std::string>& warnings() { return warnings_; }

  void prepare(const ObservationalDataset& data, bool want_propensity, bool want_outcome) {
    if (!match_covariates_.empty()) normalization_ = fit_normalization(data, match_covariates_);
    if (want_propensity) {
      if (config_.propensity) {
        propensity_ = config_.propensity;
        propensity_family_ = std::string(config_.propensity->predictor()->family());
      } else {
        auto fitted = fit_propensity(data, config_.nuisance);
        propensity_config_ = config_.nuisance.candidates[fitted.selection.chosen];
        propensity_family_ = model_family(propensity_config_);
        for (auto& w : fitted.selection.warnings) warnings_.push_back("propensity: " + w);
        propensity_ = std::move(fitted.model);
      }
    }
    if (want_outcome) {
      if (config_.outcome) {
        outcome_ = config_.outcome;
        outcome_family_ = std::string(config_.outcome->predictor()->family());
      } else {
        auto fitted = fit_outcome(data, config_.nuisance);
        outcome_config_ = config_.nuisance.candidates[fitted.selection.chosen];
        outcome_family_ = model_family(outcome_config_);
        for (auto& w : fitted.selection.warnings) warnings_.push_back("outcome: " + w);
        outcome_ = std::move(fitted.model);
      }
    }
  }

  const std::string& propensity_family() const { return propensity_family_; }
  const std::string& outcome_family() const { return outcome_family_; }

  // Full-sample estimate with the prepared models.
  AteEstimate estimate(Estimator e, const ObservationalDataset& data, std::size_t slot) const {
    return compute(e, data, slot, propensity_ ? &*propensity_ : nullptr, outcome_ ? &*outcome_ : nullptr);
  }

  // Estimate on a bootstrap resample, refitting nuisances when configured.
  double replicate(Estimator e, const ObservationalDataset& data, std::size_t slot) const {
    std::optional<PropensityModel> prop;
    std::optional<OutcomeModel> out;
    const bool refit = config_.bootstrap_refit;
    if (needs_propensity(e)) {
      if (refit && !config_.propensity)
        prop = fit_propensity_with(data, propensity_config_, config_.nuisance.propensity_clip);
      else
        prop = propensity_;
    }
    if (needs_outcome(e)) {
      if (refit && !config_.outcome)
        out = fit_outcome_with(data, outcome_config_, config_.nuisance.outcome_clip);
      else
        out = outcome_;
    }
    return compute(e, data, slot, prop ? &*prop : nullptr, out ? &*out : nullptr).value;
  }

 private:
  AteEstimate compute(Estimator e, const ObservationalDataset& data, std::size_t slot, const PropensityModel* prop,
                      const OutcomeModel* out) const {
    const double level = config_.level;
    switch (e) {
      case Estimator::unmatched: return ate_unmatched(data, level);
      case Estimator::unmatched2: return ate_adjusted(data, nuisance(data, prop, out, false, true), level);
      case Estimator::inverse_weighting: return ate_ipw_dr(data, nuisance(data, prop, out, true, true), level);
      case Estimator::inverse_weighting2:
        return ate_ipw_ht(data, nuisance(data, prop, out, true, false).propensity, level);
      default: break;
    }
    MatchConfig mc;
    mc.variant = match_variant_of(e);
    mc.trim = config_.trim_for(mc.variant);
    mc.covariates = match_covariates_;
    mc.weights = match_weights_;
    mc.max_per_side = config_.max_per_side;
    mc.seed = derive_seed(config_.seed, 200 + slot);
    mc.solver = config_.solver;
    const bool euclidean = mc.variant == MatchVariant::euclidean || mc.variant == MatchVariant::euclidean2;
    if (euclidean && match_covariates_.empty()) throw DataError("no non-constant covariates to match on");
    const auto matched = match_groups(data, mc, euclidean ? &*normalization_ : nullptr, prop);
    return ate_matched(matched.control, matched.treated, level, e);
  }

  NuisanceValues nuisance(const ObservationalDataset& data, const PropensityModel* prop, const OutcomeModel* out,
                          bool want_prop, bool want_out) const {
    const bool fixed = (!want_prop || config_.propensity) && (!want_out || config_.outcome);
    if (config_.cross_fit_folds >= 2 && !fixed) {
      auto v = cross_fit_nuisance(data, propensity_config_, outcome_config_, config_.nuisance,
                                  config_.cross_fit_folds);
      if (config_.propensity) v.propensity = config_.propensity->predict_all(data);
      if (config_.outcome)
        for (std::size_t i = 0; i < data.size(); ++i) {
          v.outcome0[i] = config_.outcome->predict(0, data.row(i).x);
          v.outcome1[i] = config_.outcome->predict(1, data.row(i).x);
        }
      return v;
    }
    NuisanceValues v;
    if (want_prop) v.propensity = prop->predict_all(data);
    if (want_out) {
      v.outcome0.reserve(data.size());
      v.outcome1.reserve(data.size());
      for (const auto& r : data.rows()) {
        v.outcome0.push_back(out->predict(0, r.x));
        v.outcome1.push_back(out->predict(1, r.x));
      }
    }
    return v;
  }

  const BatteryConfig& config_;
  std::vector<std::string> match_covariates_;
  std::vector<double> match_weights_;
  std::optional<NormalizationSpec> normalization_;
  std::optional<PropensityModel> propensity_;
  std::optional<OutcomeModel> outcome_;
  ModelConfig propensity_config_ = LogisticConfig{};
  ModelConfig outcome_config_ = LogisticConfig{};
  std::string propensity_family_;
  std::string outcome_family_;
  std::vector<std::string> warnings_;
};

[[noreturn]] void rethrow_for(Estimator e, const Error& err) {
  const std::string msg = std::string(to_string(e)) + ": " + err.what();
  switch (err.kind()) {
    case ErrorKind::config: throw ConfigError(msg);
    case ErrorKind::data: throw DataError(msg);
    case ErrorKind::estimation: throw EstimationError(msg);
  }
  throw EstimationError(msg);
}

}  // namespace

BatteryReport run_battery(const ObservationalDataset& input, const BatteryConfig& config) {
  if (!(config.level > 0.0 && config.level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (config.estimators.empty()) throw ConfigError("no estimators configured");
  if (!config.distance_weights.covariates.empty() &&
      config.distance_weights.covariates.size() != config.distance_weights.weights.size())
    throw ConfigError("distance weights length differs from covariate count");
  for (auto e : config.estimators)
    if (config.ci_method_for(e) == CiMethod::bootstrap && config.bootstrap_replicates < 50)
      throw ConfigError("bootstrap needs at least 50 replicates");
  input.require_both_groups();
  const auto data = config.covariates.empty() ? input : input.select_covariates(config.covariates);

  bool want_prop = false, want_out = false;
  for (auto e : config.estimators) {
    want_prop = want_prop || needs_propensity(e);
    want_out = want_out || needs_outcome(e);
  }
  // Cross-fitting refits both families.
  if (config.cross_fit_folds >= 2 && (want_prop || want_out)) want_prop = want_out = true;

  Pipeline pipeline(data, config);
  pipeline.prepare(data, want_prop, want_out);

  BatteryReport report;
  report.period = data.period().value_or("");
  for (std::size_t slot = 0; slot < config.estimators.size(); ++slot) {
    const auto e = config.estimators[slot];
    try {
      auto est = pipeline.estimate(e, data, slot);
      if (config.ci_method_for(e) == CiMethod::bootstrap) {
        BootstrapConfig bc;
        bc.replicates = config.bootstrap_replicates;
        bc.level = config.level;
        bc.seed = derive_seed(config.seed, 100 + slot);
        bc.jobs = config.jobs;
        const auto boot = bootstrap_ci(
            [&](const ObservationalDataset& d) { return pipeline.replicate(e, d, slot); }, data, bc);
        est.ci.lo = boot.lo;
        est.ci.hi = boot.hi;
        est.ci.method = CiMethod::bootstrap;
        est.ci.degenerate = boot.lo == boot.hi;
        for (const auto& w : boot.warnings) est.warnings.push_back(w);
      }
      report.estimates.push_back(std::move(est));
    } catch (const Error& err) {
      rethrow_for(e, err);
    }
  }
  report.summary = summarize_verdicts(report.estimates, config.majority_threshold);
  report.propensity_family = pipeline.propensity_family();
  report.outcome_family = pipeline.outcome_family();
  report.warnings = std::move(pipeline.warnings());
  return report;
}

nlohmann::json to_json(const AteEstimate& e) {
  nlohmann::json j;
  j["estimator"] = std::string(to_string(e.estimator));
  j["value"] = e.value;
  j["lo"] = e.ci.lo;
  j["hi"] = e.ci.hi;
  j["level"] = e.ci.level;
  j["method"] = std::string(to_string(e.ci.method));
  j["n0"] = e.n0;
  j["n1"] = e.n1;
  j["verdict"] = std::string(to_string(fairness_verdict(e)));
  if (e.ci.degenerate) j["degenerate"] = true;
  if (!e.warnings.empty()) j["warnings"] = e.warnings;
  return j;
}

nlohmann::json to_json(const VerdictSummary& s) {
  return {{"evidence", s.evidence},
          {"total", s.total},
          {"fraction", s.fraction},
          {"threshold", s.threshold},
          {"majority", std::string(to_string(s.majority))}};
}

nlohmann::json to_json(const BatteryReport& r) {
  nlohmann::json j;
  j["outcome"] = r.outcome;
  j["period"] = r.period;
  j["estimates"] = nlohmann::json::array();
  for (const auto& e : r.estimates) j["estimates"].push_back(to_json(e));
  j["summary"] = to_json(r.summary);
  j["propensity_family"] = r.propensity_family;
  j["outcome_family"] = r.outcome_family;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

void write_battery_records(std::ostream& out, std::span<const BatteryReport> reports) {
  out << "outcome,period,estimator,value,lo,hi,level,method,n0,n1,verdict\n";
  for (const auto& r : reports)
    for (const auto& e : r.estimates)
      out << r.outcome << ',' << r.period << ',' << to_string(e.estimator) << ',' << format_number(e.value) << ','
          << format_number(e.ci.lo) << ',' << format_number(e.ci.hi) << ',' << format_number(e.ci.level) << ','
          << to_string(e.ci.method) << ',' << e.n0 << ',' << e.n1 << ',' << to_string(fairness_verdict(e)) << '\n';
}

void write_battery_plot_table(std::ostream& out, std::span<const BatteryReport> reports) {
  std::vector<std::string> periods, outcomes;
  for (const auto& r : reports) {
    if (std::find(periods.begin(), periods.end(), r.period) == periods.end()) periods.push_back(r.period);
    if (std::find(outcomes.begin(), outcomes.end(), r.outcome) == outcomes.end()) outcomes.push_back(r.outcome);
  }
  out << "outcome,estimator";
  for (const auto& p : periods) out << ',' << p << "_value," << p << "_lo," << p << "_hi";
  out << '\n';
  for (const auto& o : outcomes) {
    std::vector<Estimator> order;
    for (const auto& r : reports)
      if (r.outcome == o)
        for (const auto& e : r.estimates)
          if (std::find(order.begin(), order.end(), e.estimator) == order.end()) order.push_back(e.estimator);
    for (auto est : order) {
      out << o << ',' << to_string(est);
      for (const auto& p : periods) {
        const AteEstimate* hit = nullptr;
        for (const auto& r : reports)
          if (r.outcome == o && r.period == p)
            for (const auto& e : r.estimates)
              if (e.estimator == est) hit = &e;
        if (hit)
          out << ',' << format_number(hit->value) << ',' << format_number(hit->ci.lo) << ','
              << format_number(hit->ci.hi);
        else
          out << ",NA,NA,NA";
      }
      out << '\n';
    }
  }
}

}  // namespace fairaudit
