#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <set>

#include "fairaudit/errors.hpp"
#include "fairaudit/report.hpp"

namespace fairaudit::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
T get(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be a list of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw ConfigError(where + " must be a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

PeriodSpec parse_period(const json& j, const std::filesystem::path& base, const std::string& fallback_name) {
  PeriodSpec p;
  p.name = fallback_name;
  json input = j;
  if (j.is_object() && !j.contains("scenario")) {
    check_keys(j, {"name", "input", "trim_period"}, "period");
    p.name = get<std::string>(j, "name", fallback_name, "period");
    p.trim_period = get<int>(j, "trim_period", 1, "period");
    if (!j.contains("input")) throw ConfigError("period '" + p.name + "' has no input");
    input = j.at("input");
  }
  if (p.trim_period < 0 || p.trim_period > 4) throw ConfigError("trim_period must be 0..4");
  if (input.is_string()) {
    p.input = base / input.get<std::string>();
  } else if (input.is_object() && input.contains("scenario")) {
    p.scenario = scenario_from_json(input.at("scenario"));
  } else {
    throw ConfigError("input must be a file path or {\"scenario\": ...}");
  }
  return p;
}

void parse_models(const json& j, BatteryConfig& b) {
  check_keys(j, {"candidates", "folds", "propensity_clip", "outcome_clip", "cross_fit_folds"}, "models");
  if (j.contains("candidates")) {
    if (!j["candidates"].is_array() || j["candidates"].empty())
      throw ConfigError("models.candidates must be a nonempty list");
    b.nuisance.candidates.clear();
    for (const auto& c : j["candidates"]) b.nuisance.candidates.push_back(model_config_from_json(c));
  }
  b.nuisance.folds = get<int>(j, "folds", b.nuisance.folds, "models");
  b.nuisance.propensity_clip = get<double>(j, "propensity_clip", b.nuisance.propensity_clip, "models");
  b.nuisance.outcome_clip = get<double>(j, "outcome_clip", b.nuisance.outcome_clip, "models");
  b.cross_fit_folds = get<int>(j, "cross_fit_folds", b.cross_fit_folds, "models");
  if (b.nuisance.folds < 2) throw ConfigError("models.folds must be at least 2");
  if (b.cross_fit_folds == 1 || b.cross_fit_folds < 0) throw ConfigError("models.cross_fit_folds must be 0 or >= 2");
  if (!(b.nuisance.propensity_clip > 0.0 && b.nuisance.propensity_clip < 0.5))
    throw ConfigError("models.propensity_clip must lie in (0, 0.5)");
}

void parse_ci(const json& j, BatteryConfig& b) {
  check_keys(j, {"level", "methods", "bootstrap_replicates", "bootstrap_refit"}, "ci");
  b.level = get<double>(j, "level", b.level, "ci");
  if (!(b.level > 0.0 && b.level < 1.0)) throw ConfigError("ci.level must lie in (0, 1)");
  if (j.contains("methods")) {
    if (!j["methods"].is_object()) throw ConfigError("ci.methods must map estimator names to methods");
    for (const auto& [name, method] : j["methods"].items())
      b.ci_methods[estimator_from_string(name)] = ci_method_from_string(method.get<std::string>());
  }
  b.bootstrap_replicates = get<std::size_t>(j, "bootstrap_replicates", b.bootstrap_replicates, "ci");
  b.bootstrap_refit = get<bool>(j, "bootstrap_refit", b.bootstrap_refit, "ci");
}

void parse_solver(const json& j, TransportOptions& s) {
  check_keys(j, {"method", "max_iterations", "epsilon", "tolerance"}, "solver");
  const auto method = get<std::string>(j, "method", "exact", "solver");
  if (method == "exact")
    s.method = TransportMethod::exact;
  else if (method == "entropic")
    s.method = TransportMethod::entropic;
  else
    throw ConfigError("solver.method must be 'exact' or 'entropic'");
  s.max_iterations = get<std::size_t>(j, "max_iterations", s.max_iterations, "solver");
  s.entropic_epsilon = get<double>(j, "epsilon", s.entropic_epsilon, "solver");
  s.entropic_tolerance = get<double>(j, "tolerance", s.entropic_tolerance, "solver");
}

void parse_diagnose(const json& j, DiagnoseSettings& d) {
  check_keys(j, {"permutations", "level", "sigma", "max_rows", "grid_size"}, "diagnose");
  d.permutations = get<std::size_t>(j, "permutations", d.permutations, "diagnose");
  d.level = get<double>(j, "level", d.level, "diagnose");
  if (j.contains("sigma") && !j["sigma"].is_null()) d.sigma = get<double>(j, "sigma", 0.0, "diagnose");
  d.max_rows = get<std::size_t>(j, "max_rows", d.max_rows, "diagnose");
  d.grid_size = get<std::size_t>(j, "grid_size", d.grid_size, "diagnose");
  if (d.max_rows < 10) throw ConfigError("diagnose.max_rows must be at least 10");
}

void parse_sensitivity(const json& j, SensitivitySettings& s) {
  check_keys(j,
             {"grid_size", "eta_min", "eta_max", "draws", "band_replicates", "band_draws", "band_level", "groups",
              "target_bias", "propensity_model", "outcome_model"},
             "sensitivity");
  s.grid_size = get<std::size_t>(j, "grid_size", s.grid_size, "sensitivity");
  s.eta_min = get<double>(j, "eta_min", s.eta_min, "sensitivity");
  s.eta_max = get<double>(j, "eta_max", s.eta_max, "sensitivity");
  s.draws = get<std::size_t>(j, "draws", s.draws, "sensitivity");
  s.band_replicates = get<std::size_t>(j, "band_replicates", s.band_replicates, "sensitivity");
  s.band_draws = get<std::size_t>(j, "band_draws", s.band_draws, "sensitivity");
  s.band_level = get<double>(j, "band_level", s.band_level, "sensitivity");
  if (j.contains("target_bias") && !j["target_bias"].is_null())
    s.target_bias = get<double>(j, "target_bias", 0.0, "sensitivity");
  if (j.contains("groups")) {
    if (!j["groups"].is_array()) throw ConfigError("sensitivity.groups must be a list");
    for (const auto& g : j["groups"]) {
      check_keys(g, {"name", "covariates"}, "sensitivity group");
      s.groups.emplace_back(get<std::string>(g, "name", "", "sensitivity group"),
                            string_list(g.value("covariates", json::array()), "sensitivity group covariates"));
      if (s.groups.back().first.empty() || s.groups.back().second.empty())
        throw ConfigError("sensitivity groups need a name and covariates");
    }
  }
  if (j.contains("propensity_model")) s.propensity_family = model_config_from_json(j["propensity_model"]);
  if (j.contains("outcome_model")) s.outcome_family = model_config_from_json(j["outcome_model"]);
}

}  // namespace

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

AuditConfig parse_audit_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  check_keys(j,
             {"input", "periods", "schema", "columns", "delimiter", "missing", "filter", "outcomes", "covariates",
              "estimators", "trim", "trim_table", "distance_weights", "models", "ci", "majority_threshold",
              "max_per_side", "solver", "match", "diagnose", "sensitivity", "seed", "jobs", "output_dir"},
             "config");
  AuditConfig c;

  if (j.contains("periods") == j.contains("input")) throw ConfigError("config needs exactly one of input, periods");
  if (j.contains("input")) {
    c.periods.push_back(parse_period(j["input"], base_dir, "all"));
  } else {
    if (!j["periods"].is_array() || j["periods"].empty()) throw ConfigError("periods must be a nonempty list");
    for (std::size_t k = 0; k < j["periods"].size(); ++k)
      c.periods.push_back(parse_period(j["periods"][k], base_dir, std::to_string(k + 1)));
  }
  std::set<std::string> period_names;
  for (const auto& p : c.periods)
    if (!period_names.insert(p.name).second) throw ConfigError("duplicate period name '" + p.name + "'");

  if (j.contains("schema")) {
    const auto& s = j["schema"];
    c.schema = schema_from_descriptor(s.is_string() ? read_json_file(base_dir / s.get<std::string>()) : s);
  }
  if (j.contains("columns")) {
    const auto& cols = j["columns"];
    check_keys(cols, {"treatment", "covariates"}, "columns");
    c.treatment_column = get<std::string>(cols, "treatment", c.treatment_column, "columns");
    if (cols.contains("covariates")) c.covariate_columns = get<std::map<std::string, std::string>>(cols, "covariates", {}, "columns");
  }
  const auto delimiter = get<std::string>(j, "delimiter", ",", "config");
  if (delimiter.size() != 1) throw ConfigError("delimiter must be a single character");
  c.load.delimiter = delimiter[0];
  const auto missing = get<std::string>(j, "missing", "error", "config");
  if (missing != "error" && missing != "drop") throw ConfigError("missing must be 'error' or 'drop'");
  c.load.missing = missing == "drop" ? MissingPolicy::drop : MissingPolicy::error;
  if (j.contains("filter")) {
    check_keys(j["filter"], {"age_over", "covariate"}, "filter");
    if (j["filter"].contains("age_over")) c.age_over = get<double>(j["filter"], "age_over", 0.0, "filter");
    c.age_covariate = get<std::string>(j["filter"], "covariate", c.age_covariate, "filter");
  }

  if (j.contains("outcomes")) {
    if (!j["outcomes"].is_array() || j["outcomes"].empty()) throw ConfigError("outcomes must be a nonempty list");
    std::set<std::string> names;
    for (const auto& o : j["outcomes"]) {
      check_keys(o, {"name", "column", "kind"}, "outcome");
      OutcomeSpec spec;
      spec.column = get<std::string>(o, "column", "y", "outcome");
      spec.name = get<std::string>(o, "name", spec.column, "outcome");
      spec.kind = outcome_kind_from_string(get<std::string>(o, "kind", "hospitalisation_death", "outcome"));
      if (!names.insert(spec.name).second) throw ConfigError("duplicate outcome name '" + spec.name + "'");
      c.outcomes.push_back(spec);
    }
  } else {
    c.outcomes.push_back({"y", "y", OutcomeKind::hospitalisation_death});
  }
  for (const auto& p : c.periods)
    if (p.scenario)
      for (const auto& o : c.outcomes)
        if (o.column != "y") throw ConfigError("simulated inputs only provide the outcome column 'y'");

  auto& b = c.battery;
  if (j.contains("covariates")) b.covariates = string_list(j["covariates"], "covariates");
  if (j.contains("estimators")) {
    b.estimators.clear();
    for (const auto& name : string_list(j["estimators"], "estimators")) b.estimators.push_back(estimator_from_string(name));
    if (b.estimators.empty()) throw ConfigError("estimators must not be empty");
  }
  if (j.contains("trim")) {
    if (!j["trim"].is_object()) throw ConfigError("trim must map matched estimators to [alpha0, alpha1]");
    for (const auto& [name, pair] : j["trim"].items()) {
      if (!pair.is_array() || pair.size() != 2) throw ConfigError("trim." + name + " must be [alpha0, alpha1]");
      TrimSpec t{pair[0].get<double>(), pair[1].get<double>()};
      t.validate();
      b.trim[match_variant_from_string(name)] = t;
    }
  }
  if (j.contains("trim_table")) b.trim_table = TrimTable::from_json(j["trim_table"]);
  if (j.contains("distance_weights")) {
    const auto& w = j["distance_weights"];
    if (w.is_string()) {
      const auto name = w.get<std::string>();
      if (name == "unit")
        c.weight_preset = WeightPreset::unit;
      else if (name == "in_hospital")
        c.weight_preset = WeightPreset::in_hospital;
      else
        throw ConfigError("distance_weights must be 'unit', 'in_hospital' or an explicit table");
    } else {
      check_keys(w, {"covariates", "weights"}, "distance_weights");
      c.weight_preset = WeightPreset::custom;
      b.distance_weights.covariates = string_list(w.value("covariates", json::array()), "distance_weights.covariates");
      b.distance_weights.weights = get<std::vector<double>>(w, "weights", {}, "distance_weights");
      if (b.distance_weights.covariates.size() != b.distance_weights.weights.size())
        throw ConfigError("distance_weights covariates and weights differ in length");
    }
  }
  if (j.contains("models")) parse_models(j["models"], b);
  if (j.contains("ci")) parse_ci(j["ci"], b);
  b.majority_threshold = get<double>(j, "majority_threshold", b.majority_threshold, "config");
  if (!(b.majority_threshold > 0.0 && b.majority_threshold <= 1.0))
    throw ConfigError("majority_threshold must lie in (0, 1]");
  b.max_per_side = get<std::size_t>(j, "max_per_side", b.max_per_side, "config");
  if (j.contains("solver")) parse_solver(j["solver"], b.solver);

  if (j.contains("match")) {
    check_keys(j["match"], {"variants"}, "match");
    if (j["match"].contains("variants")) {
      c.match_variants.clear();
      for (const auto& v : string_list(j["match"]["variants"], "match.variants"))
        c.match_variants.push_back(match_variant_from_string(v));
    }
  }
  if (j.contains("diagnose")) parse_diagnose(j["diagnose"], c.diagnose);
  if (j.contains("sensitivity")) parse_sensitivity(j["sensitivity"], c.sensitivity);

  c.seed = get<std::uint64_t>(j, "seed", 0, "config");
  c.jobs = get<int>(j, "jobs", 1, "config");
  if (j.contains("output_dir")) c.output_dir = base_dir / get<std::string>(j, "output_dir", "", "config");

  for (const auto& p : c.periods)
    if (p.trim_period == 0)
      for (auto e : b.estimators)
        if (is_matched(e) && !b.trim.count(match_variant_of(e)))
          throw ConfigError("period '" + p.name + "' has trim_period 0 but no explicit trim for " +
                            std::string(to_string(e)));

  c.canonical = j;
  c.canonical.erase("jobs");
  c.canonical.erase("output_dir");
  return c;
}

AuditConfig load_audit_config(const std::filesystem::path& path) {
  return parse_audit_config(read_json_file(path), path.parent_path());
}

std::uint64_t config_hash(const AuditConfig& config) {
  auto j = config.canonical;
  j["seed"] = config.seed;
  return fnv1a64(j.dump());
}

}  // namespace fairaudit::cli
