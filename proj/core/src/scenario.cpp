#include "fairaudit/scenario.hpp"

#include <cmath>
#include <random>

#include "fairaudit/errors.hpp"
#include "fairaudit/random.hpp"

namespace fairaudit {

namespace {

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void validate_form(const ProbabilityForm& f, std::size_t p, std::string_view what) {
  if (f.coefficients.size() != p)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(p) + " coefficients");
  if (!(0.0 <= f.lo && f.lo <= f.hi && f.hi <= 1.0))
    throw ConfigError(std::string(what) + ": need 0 <= lo <= hi <= 1");
}

double draw_covariate(const CovariateGenerator& g, Rng& rng) {
  switch (g.distribution) {
    case Distribution::normal: return std::normal_distribution<double>(g.a, g.b)(rng);
    case Distribution::uniform: return std::uniform_real_distribution<double>(g.a, g.b)(rng);
    case Distribution::bernoulli: return std::bernoulli_distribution(g.a)(rng) ? 1.0 : 0.0;
  }
  return 0.0;
}

Distribution distribution_from_string(std::string_view s) {
  if (s == "normal") return Distribution::normal;
  if (s == "uniform") return Distribution::uniform;
  if (s == "bernoulli") return Distribution::bernoulli;
  throw ConfigError("unknown distribution '" + std::string(s) + "'");
}

std::string_view to_string(Distribution d) {
  switch (d) {
    case Distribution::normal: return "normal";
    case Distribution::uniform: return "uniform";
    case Distribution::bernoulli: return "bernoulli";
  }
  return "?";
}

}  // namespace

double ProbabilityForm::operator()(std::span<const double> x, double u) const {
  double t = intercept + u_coefficient * u;
  for (std::size_t k = 0; k < coefficients.size(); ++k) t += coefficients[k] * x[k];
  return lo + (hi - lo) * sigmoid(t);
}

void ScenarioSpec::validate() const {
  if (n == 0) throw ConfigError("scenario needs n > 0");
  if (covariates.empty()) throw ConfigError("scenario needs at least one covariate");
  for (const auto& g : covariates) {
    if (g.distribution == Distribution::normal && !(g.b > 0.0))
      throw ConfigError("covariate '" + g.name + "': sd must be positive");
    if (g.distribution == Distribution::uniform && !(g.a < g.b))
      throw ConfigError("covariate '" + g.name + "': need lower < upper");
    if (g.distribution == Distribution::bernoulli && !(g.a >= 0.0 && g.a <= 1.0))
      throw ConfigError("covariate '" + g.name + "': p must lie in [0, 1]");
  }
  const auto p = covariates.size();
  validate_form(propensity, p, "propensity");
  validate_form(outcome0, p, "outcome p0");
  if (outcome1) {
    validate_form(*outcome1, p, "outcome p1");
  } else if (outcome0.lo + shift < 0.0 || outcome0.hi + shift > 1.0) {
    throw ConfigError("p0 + shift leaves [0, 1]");
  }
  schema();
}

CovariateSchema ScenarioSpec::schema() const {
  std::vector<Covariate> entries;
  for (const auto& g : covariates)
    entries.push_back({g.name, g.distribution == Distribution::bernoulli ? CovariateKind::binary
                                                                         : CovariateKind::continuous});
  if (emit_u) entries.push_back({"u", CovariateKind::continuous});
  return CovariateSchema(std::move(entries));
}

double ScenarioSpec::propensity_at(std::span<const double> x, double u) const {
  return std::clamp(propensity(x, u), kPropensityBound, 1.0 - kPropensityBound);
}

double ScenarioSpec::outcome_at(int z, std::span<const double> x, double u) const {
  if (z == 0) return outcome0(x, u);
  return outcome1 ? (*outcome1)(x, u) : outcome0(x, u) + shift;
}

bool ScenarioSpec::has_hidden_confounding() const {
  return propensity.u_coefficient != 0.0 || outcome0.u_coefficient != 0.0 ||
         (outcome1 && outcome1->u_coefficient != 0.0);
}

ObservationalDataset generate(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::normal_distribution<double> unit_normal;
  std::uniform_real_distribution<double> unit;
  std::vector<Observation> rows;
  rows.reserve(spec.n);
  const std::size_t p = spec.covariates.size();
  for (std::size_t i = 0; i < spec.n; ++i) {
    Observation r;
    r.x.resize(p);
    for (std::size_t k = 0; k < p; ++k) r.x[k] = draw_covariate(spec.covariates[k], rng);
    const double u = unit_normal(rng);
    const std::span<const double> x(r.x.data(), p);
    r.z = unit(rng) < spec.propensity_at(x, u) ? 1 : 0;
    r.y = unit(rng) < spec.outcome_at(r.z, x, u) ? 1 : 0;
    if (spec.emit_u) r.x.push_back(u);
    rows.push_back(std::move(r));
  }
  return ObservationalDataset(spec.schema(), std::move(rows));
}

TrueAte true_ate(const ScenarioSpec& spec, std::size_t draws) {
  spec.validate();
  if (!spec.outcome1) return {spec.shift, 0.0, true};
  if (draws < 2) throw ConfigError("true ATE needs at least two draws");
  Rng rng(derive_seed(spec.seed, 0x7a7e));
  std::normal_distribution<double> unit_normal;
  std::vector<double> x(spec.covariates.size());
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = draw_covariate(spec.covariates[j], rng);
    const double u = unit_normal(rng);
    const double d = spec.outcome_at(1, x, u) - spec.outcome_at(0, x, u);
    sum += d;
    sum2 += d * d;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n), false};
}

PropensityModel oracle_propensity(const ScenarioSpec& spec, double clip) {
  spec.validate();
  if (spec.propensity.u_coefficient != 0.0) throw ConfigError("the true propensity depends on the latent U");
  const std::size_t p = spec.covariates.size() + (spec.emit_u ? 1 : 0);
  auto f = [spec](std::span<const double> x) { return spec.propensity_at(x.first(spec.covariates.size()), 0.0); };
  return PropensityModel(std::make_shared<FunctionPredictor>(p, f, "oracle-propensity"), clip);
}

OutcomeModel oracle_outcome(const ScenarioSpec& spec, double clip) {
  spec.validate();
  if (spec.outcome0.u_coefficient != 0.0 || (spec.outcome1 && spec.outcome1->u_coefficient != 0.0))
    throw ConfigError("the true outcome regression depends on the latent U");
  const std::size_t p = spec.covariates.size() + (spec.emit_u ? 1 : 0);
  auto f = [spec](std::span<const double> zx) {
    const int z = zx[0] > 0.5 ? 1 : 0;
    return spec.outcome_at(z, zx.subspan(1, spec.covariates.size()), 0.0);
  };
  return OutcomeModel(std::make_shared<FunctionPredictor>(p + 1, f, "oracle-outcome"), clip);
}

std::vector<std::string> preset_names() {
  return {"null-randomized", "confounded-shift", "confounded-null", "hidden-confounder"};
}

ScenarioSpec preset(std::string_view name, std::size_t n, std::uint64_t seed) {
  ScenarioSpec s;
  s.n = n;
  s.seed = seed;
  s.covariates = {{"x1", Distribution::normal, 0.0, 1.0},
                  {"x2", Distribution::normal, 0.0, 1.0},
                  {"x3", Distribution::bernoulli, 0.4, 0.0}};
  s.outcome0 = {0.1, 0.7, -0.5, {1.5, 0.8, 0.4}, 0.0};
  if (name == "null-randomized") {
    s.propensity = {0.0, 1.0, 0.0, {0.0, 0.0, 0.0}, 0.0};
    s.shift = 0.0;
  } else if (name == "confounded-shift" || name == "confounded-null") {
    s.propensity = {0.0, 1.0, -0.3, {0.8, 0.5, 0.3}, 0.0};
    s.shift = name == "confounded-shift" ? 0.2 : 0.0;
  } else if (name == "hidden-confounder") {
    s.propensity = {0.0, 1.0, -0.3, {0.6, 0.4, 0.3}, 0.8};
    s.outcome0.u_coefficient = 1.0;
    s.shift = 0.15;
  } else {
    throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
  }
  return s;
}

namespace {

ProbabilityForm form_from_json(const nlohmann::json& j) {
  ProbabilityForm f;
  f.lo = j.value("lo", 0.0);
  f.hi = j.value("hi", 1.0);
  f.intercept = j.value("intercept", 0.0);
  f.coefficients = j.value("coefficients", std::vector<double>{});
  f.u_coefficient = j.value("u", 0.0);
  return f;
}

nlohmann::json form_to_json(const ProbabilityForm& f) {
  return {{"lo", f.lo}, {"hi", f.hi}, {"intercept", f.intercept}, {"coefficients", f.coefficients},
          {"u", f.u_coefficient}};
}

}  // namespace

ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    if (j.contains("preset")) {
      s = preset(j.at("preset").get<std::string>(), j.value("n", std::size_t{5000}), j.value("seed", std::uint64_t{0}));
      s.emit_u = j.value("emit_u", false);
      s.validate();
      return s;
    }
    s.n = j.value("n", std::size_t{1000});
    s.seed = j.value("seed", std::uint64_t{0});
    s.emit_u = j.value("emit_u", false);
    for (const auto& c : j.at("covariates")) {
      CovariateGenerator g;
      g.name = c.at("name").get<std::string>();
      g.distribution = distribution_from_string(c.value("distribution", std::string("normal")));
      switch (g.distribution) {
        case Distribution::normal:
          g.a = c.value("mean", 0.0);
          g.b = c.value("sd", 1.0);
          break;
        case Distribution::uniform:
          g.a = c.value("lower", 0.0);
          g.b = c.value("upper", 1.0);
          break;
        case Distribution::bernoulli: g.a = c.value("p", 0.5); break;
      }
      s.covariates.push_back(std::move(g));
    }
    s.propensity = form_from_json(j.at("propensity"));
    const auto& out = j.at("outcome");
    s.outcome0 = form_from_json(out.at("p0"));
    if (out.contains("p1")) s.outcome1 = form_from_json(out.at("p1"));
    s.shift = out.value("shift", 0.0);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid scenario spec: ") + e.what());
  }
}

nlohmann::json to_json(const ScenarioSpec& spec) {
  nlohmann::json j;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["emit_u"] = spec.emit_u;
  j["covariates"] = nlohmann::json::array();
  for (const auto& g : spec.covariates) {
    nlohmann::json c{{"name", g.name}, {"distribution", std::string(to_string(g.distribution))}};
    switch (g.distribution) {
      case Distribution::normal: c["mean"] = g.a; c["sd"] = g.b; break;
      case Distribution::uniform: c["lower"] = g.a; c["upper"] = g.b; break;
      case Distribution::bernoulli: c["p"] = g.a; break;
    }
    j["covariates"].push_back(std::move(c));
  }
  j["propensity"] = form_to_json(spec.propensity);
  j["outcome"]["p0"] = form_to_json(spec.outcome0);
  if (spec.outcome1) j["outcome"]["p1"] = form_to_json(*spec.outcome1);
  j["outcome"]["shift"] = spec.shift;
  return j;
}

}  // namespace fairaudit
