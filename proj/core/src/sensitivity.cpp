#include "fairaudit/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "fairaudit/bootstrap.hpp"
#include "fairaudit/errors.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/random.hpp"
#include "fairaudit/report.hpp"

namespace fairaudit {

void SensitivityParams::validate() const {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie strictly inside (0, 1)");
  if (!std::isfinite(delta)) throw ConfigError("delta must be finite");
}

namespace {

// Uniform on (0, 1].
double open_uniform(Rng& rng) { return 1.0 - std::generate_canonical<double, 53>(rng); }

// log of a Gamma(shape, 1) draw; small shapes use G(a) = G(a + 1) U^(1/a).
double log_gamma_draw(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape)(rng));
  const double g = std::gamma_distribution<double>(shape + 1.0)(rng);
  return std::log(g) + std::log(open_uniform(rng)) / shape;
}

std::pair<double, double> beta_shapes(double e, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("eta must lie strictly inside (0, 1)");
  if (!(e > 0.0 && e < 1.0)) throw EstimationError("propensity must be clipped away from 0 and 1");
  const double k = (1.0 - eta) / eta;
  return {e * k, (1.0 - e) * k};
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

std::vector<double> simulate_latent_propensity(double e, double eta, std::size_t draws, std::uint64_t seed) {
  const auto [a, b] = beta_shapes(e, eta);
  Rng rng(seed);
  std::vector<double> out(draws);
  for (auto& v : out) {
    const double la = log_gamma_draw(a, rng);
    const double lb = log_gamma_draw(b, rng);
    v = 1.0 / (1.0 + std::exp(lb - la));
  }
  return out;
}

std::vector<double> simulate_latent_propensity(const PropensityModel& propensity, double eta,
                                               std::span<const double> x, std::size_t draws, std::uint64_t seed) {
  return simulate_latent_propensity(propensity.predict(x), eta, draws, seed);
}

LatentLogitMoments latent_logit_moments(double eta, const ObservationalDataset& data,
                                        std::span<const double> propensity, const LatentDrawConfig& config) {
  if (propensity.size() != data.size()) throw EstimationError("propensity vector length mismatch");
  if (config.draws < 2) throw ConfigError("latent draws must be at least 2");
  if (data.empty()) throw DataError("empty dataset");
  const double d = static_cast<double>(config.draws);
  double gap_total = 0.0, var_total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [a, b] = beta_shapes(propensity[i], eta);
    Rng rng = make_rng(config.seed, i);
    // Given Z = 1 the latent propensity is Beta(a + 1, b), given Z = 0 it is
    // Beta(a, b + 1). Both share the Gamma(a + 1) and Gamma(b + 1) draws.
    double s1 = 0.0, s0 = 0.0, own = 0.0, own2 = 0.0;
    for (std::size_t k = 0; k < config.draws; ++k) {
      const double g_a1 = log_gamma_draw(a + 1.0, rng);
      const double g_b1 = log_gamma_draw(b + 1.0, rng);
      const double g_a = g_a1 + std::log(open_uniform(rng)) / a;
      const double g_b = g_b1 + std::log(open_uniform(rng)) / b;
      const double l1 = g_a1 - g_b;
      const double l0 = g_a - g_b1;
      s1 += l1;
      s0 += l0;
      const double l = data.row(i).z == 1 ? l1 : l0;
      own += l;
      own2 += l * l;
    }
    gap_total += (s1 - s0) / d;
    const double mean = own / d;
    var_total += std::max(0.0, (own2 - d * mean * mean) / (d - 1.0));
  }
  const double n = static_cast<double>(data.size());
  return {gap_total / n, var_total / n};
}

double bias_of(const SensitivityParams& params, const ObservationalDataset& data, const PropensityModel& propensity,
               const LatentDrawConfig& draws) {
  params.validate();
  if (params.delta == 0.0) return 0.0;
  const auto e = propensity.predict_all(data);
  const auto m = latent_logit_moments(params.eta, data, e, draws);
  if (!std::isfinite(m.gap)) throw EstimationError("non-finite latent logit gap");
  return std::abs(params.delta * m.gap);
}

DeltaRequired delta_required(double eta, double target, const ObservationalDataset& data,
                             const PropensityModel& propensity, const LatentDrawConfig& draws) {
  if (!(target >= 0.0)) throw ConfigError("target bias must be nonnegative");
  SensitivityParams{eta, 0.0}.validate();
  if (target == 0.0) return {0.0, false};
  const auto e = propensity.predict_all(data);
  const double gap = std::abs(latent_logit_moments(eta, data, e, draws).gap);
  if (!(gap > 0.0) || !std::isfinite(gap)) return {std::numeric_limits<double>::infinity(), true};
  return {target / gap, false};
}

namespace {

// Out-of-fold predictions of an intercept-only model.
std::vector<double> out_of_fold_rate(const Eigen::VectorXd& labels, int folds, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(labels.size());
  const auto fold = fold_assignment(n, folds, seed);
  std::vector<double> pred(n);
  for (int f = 0; f < folds; ++f) {
    double s = 0.0, c = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (fold[i] != f) {
        s += labels[static_cast<Eigen::Index>(i)];
        c += 1.0;
      }
    const double rate = (s + 0.5) / (c + 1.0);
    for (std::size_t i = 0; i < n; ++i)
      if (fold[i] == f) pred[i] = rate;
  }
  return pred;
}

double mean_squared_error(const std::vector<double>& p, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = y[static_cast<Eigen::Index>(i)] - p[i];
    s += r * r;
  }
  return s / static_cast<double>(p.size());
}

double improvement(double full, double reduced) {
  if (!(reduced > 0.0)) return 0.0;
  return std::max(0.0, 1.0 - full / reduced);
}

}  // namespace

GroupInfluence influence_of_group(const ObservationalDataset& data, std::span<const std::string> group,
                                  const ModelConfig& propensity_family, const ModelConfig& outcome_family,
                                  int folds, std::uint64_t seed) {
  GroupInfluence out;
  if (group.empty()) return out;
  for (const auto& g : group)
    if (!data.schema().contains(g)) throw ConfigError("covariate group member '" + g + "' is not in the schema");
  data.require_both_groups();

  const auto n = static_cast<Eigen::Index>(data.size());
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd z = treatment_vector(data);
  const Eigen::VectorXd y = outcome_vector(data);
  const auto prop_seed = derive_seed(seed, 1);
  const auto out_seed = derive_seed(seed, 2);

  const auto prop_full = out_of_fold_predictions(propensity_family, covariate_matrix(data), z, w, folds, prop_seed);
  const auto out_full = out_of_fold_predictions(outcome_family, outcome_design(data), y, w, folds, out_seed);

  std::vector<double> prop_reduced, out_reduced;
  std::vector<std::string> unique(group.begin(), group.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() == data.schema().size()) {
    out.degenerate = true;
    prop_reduced = out_of_fold_rate(z, folds, prop_seed);
    Eigen::MatrixXd zonly(n, 1);
    zonly.col(0) = z;
    out_reduced = out_of_fold_predictions(outcome_family, zonly, y, w, folds, out_seed);
  } else {
    const auto reduced = data.drop_covariates(unique);
    prop_reduced = out_of_fold_predictions(propensity_family, covariate_matrix(reduced), z, w, folds, prop_seed);
    out_reduced = out_of_fold_predictions(outcome_family, outcome_design(reduced), y, w, folds, out_seed);
  }
  out.treatment = improvement(log_loss(prop_full, z, w), log_loss(prop_reduced, z, w));
  out.outcome = improvement(mean_squared_error(out_full, y), mean_squared_error(out_reduced, y));
  return out;
}

std::optional<double> target_bias(std::span<const AteEstimate> estimates) {
  const std::size_t k = estimates.size();
  const std::size_t need = (k + 1) / 2;
  std::vector<double> shifts;
  std::size_t contain = 0;
  for (const auto& e : estimates) {
    if (e.ci.lo <= 0.0 && 0.0 <= e.ci.hi) {
      ++contain;
      shifts.push_back(0.0);
    } else {
      shifts.push_back(std::min(std::abs(e.ci.lo), std::abs(e.ci.hi)));
    }
  }
  if (k == 0 || contain >= need || k - contain < 2) return std::nullopt;
  std::sort(shifts.begin(), shifts.end());
  return shifts[need - 1];
}

std::vector<double> eta_grid(std::size_t size, double lo, double hi) {
  if (size == 0) throw ConfigError("grid size must be positive");
  if (!(lo > 0.0 && hi < 1.0 && lo <= hi)) throw ConfigError("eta grid must lie inside (0, 1)");
  std::vector<double> g(size);
  for (std::size_t k = 0; k < size; ++k)
    g[k] = size == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(size - 1);
  if (size > 1) g.back() = hi;
  return g;
}

namespace {

double residual_mse(const ObservationalDataset& data, const OutcomeModel& outcome) {
  double s = 0.0;
  for (const auto& r : data.rows()) {
    const double res = r.y - outcome.predict(r.z, r.x);
    s += res * res;
  }
  return s / static_cast<double>(data.size());
}

std::vector<FrontierPoint> frontier(const ObservationalDataset& data, const PropensityModel& propensity,
                                    const OutcomeModel& outcome, const std::vector<double>& grid, double target,
                                    const LatentDrawConfig& draws, int jobs) {
  const auto e = propensity.predict_all(data);
  const double resid = residual_mse(data, outcome);
  std::vector<FrontierPoint> points(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t k) {
    const auto m = latent_logit_moments(grid[k], data, e, draws);
    FrontierPoint p;
    p.eta = grid[k];
    p.treatment_influence = grid[k];
    p.delta = m.gap > 0.0 ? target / m.gap : std::numeric_limits<double>::infinity();
    p.outcome_influence = resid > 0.0 ? p.delta * p.delta * m.conditional_variance / resid
                                      : std::numeric_limits<double>::infinity();
    points[k] = p;
  });
  return points;
}

}  // namespace

AustenCurve austen_curve(const ObservationalDataset& data, std::span<const AteEstimate> estimates,
                         const PropensityModel& propensity, const OutcomeModel& outcome, const AustenConfig& config) {
  AustenCurve curve;
  const auto target = config.target_bias ? config.target_bias : target_bias(estimates);
  if (!target) {
    curve.vacuous = true;
    curve.warnings.push_back("fewer than two intervals exclude 0 or half already contain it");
    return curve;
  }
  if (!(*target >= 0.0)) throw ConfigError("target bias must be nonnegative");
  curve.target_bias = *target;
  const auto grid = eta_grid(config.grid_size, config.eta_min, config.eta_max);
  curve.frontier = frontier(data, propensity, outcome, grid, *target, config.draws, config.jobs);
  for (const auto& p : curve.frontier)
    if (!std::isfinite(p.outcome_influence))
      throw EstimationError("non-finite outcome influence at eta = " + format_number(p.eta));

  for (std::size_t g = 0; g < config.groups.size(); ++g) {
    const auto& [name, members] = config.groups[g];
    curve.covariate_points.push_back({name, influence_of_group(data, members, config.propensity_family,
                                                               config.outcome_family, config.folds,
                                                               derive_seed(config.seed, 500 + g))});
  }

  if (config.band_replicates > 0) {
    if (config.band_replicates < 50) throw ConfigError("bands need at least 50 bootstrap replicates");
    const auto sorted_data = canonical_order(data);
    LatentDrawConfig band_draws{config.band_draws, config.draws.seed};
    std::vector<std::vector<double>> values(config.band_replicates);
    std::vector<char> ok(config.band_replicates, 0);
    parallel_for(config.band_replicates, config.jobs, [&](std::size_t r) {
      try {
        const auto d = sorted_data.select(stratified_resample(sorted_data, derive_seed(config.seed, 1000 + r)));
        const auto prop = fit_propensity_with(d, config.propensity_family, config.propensity_clip);
        const auto out = fit_outcome_with(d, config.outcome_family, config.outcome_clip);
        const auto pts = frontier(d, prop, out, grid, *target, band_draws, 1);
        for (const auto& p : pts) values[r].push_back(p.outcome_influence);
        ok[r] = 1;
      } catch (const Error&) {
      }
    });
    std::size_t failed = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0));
    if (static_cast<double>(failed) > 0.1 * static_cast<double>(config.band_replicates))
      throw EstimationError(std::to_string(failed) + " band replicates failed");
    if (failed > 0) curve.warnings.push_back(std::to_string(failed) + " band replicates failed and were dropped");
    for (std::size_t k = 0; k < grid.size(); ++k) {
      std::vector<double> col;
      for (std::size_t r = 0; r < values.size(); ++r)
        if (ok[r]) col.push_back(values[r][k]);
      std::sort(col.begin(), col.end());
      curve.bands.push_back({grid[k], sorted_quantile(col, (1.0 - config.band_level) / 2.0),
                             sorted_quantile(col, (1.0 + config.band_level) / 2.0)});
    }
  }
  return curve;
}

SensitivityParams calibrate_sensitivity(const ObservationalDataset& data, std::span<const double> full_propensity,
                                        std::span<const double> reduced_propensity,
                                        std::span<const double> full_outcome,
                                        std::span<const double> reduced_outcome) {
  const std::size_t n = data.size();
  if (full_propensity.size() != n || reduced_propensity.size() != n || full_outcome.size() != n ||
      reduced_outcome.size() != n)
    throw EstimationError("calibration inputs must have one value per row");
  data.require_both_groups();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = full_propensity[i] - reduced_propensity[i];
    num += d * d;
    den += reduced_propensity[i] * (1.0 - reduced_propensity[i]);
  }
  SensitivityParams p;
  p.eta = std::clamp(num / den, 1e-6, 1.0 - 1e-6);

  double lmean[2] = {0, 0}, dmean[2] = {0, 0}, count[2] = {0, 0};
  std::vector<double> l(n), diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int z = data.row(i).z;
    l[i] = logit(full_propensity[i]);
    diff[i] = full_outcome[i] - reduced_outcome[i];
    lmean[z] += l[i];
    dmean[z] += diff[i];
    count[z] += 1.0;
  }
  for (int z : {0, 1}) {
    lmean[z] /= count[z];
    dmean[z] /= count[z];
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int z = data.row(i).z;
    const double lc = l[i] - lmean[z];
    sxy += lc * (diff[i] - dmean[z]);
    sxx += lc * lc;
  }
  p.delta = sxx > 0.0 ? sxy / sxx : 0.0;
  return p;
}

nlohmann::json to_json(const AustenCurve& curve) {
  nlohmann::json j;
  j["vacuous"] = curve.vacuous;
  j["target_bias"] = curve.target_bias;
  j["frontier"] = nlohmann::json::array();
  for (const auto& p : curve.frontier)
    j["frontier"].push_back({{"eta", p.eta},
                             {"treatment_influence", p.treatment_influence},
                             {"outcome_influence", p.outcome_influence},
                             {"delta", p.delta}});
  j["covariate_points"] = nlohmann::json::array();
  for (const auto& c : curve.covariate_points)
    j["covariate_points"].push_back({{"group", c.group},
                                     {"treatment_influence", c.influence.treatment},
                                     {"outcome_influence", c.influence.outcome},
                                     {"degenerate", c.influence.degenerate}});
  j["bands"] = nlohmann::json::array();
  for (const auto& b : curve.bands) j["bands"].push_back({{"eta", b.eta}, {"lo", b.lo}, {"hi", b.hi}});
  if (!curve.warnings.empty()) j["warnings"] = curve.warnings;
  return j;
}

void write_austen_curve(std::ostream& out, const AustenCurve& curve) {
  if (curve.vacuous) {
    out << "curve,empty\n";
    return;
  }
  out << "target_bias," << format_number(curve.target_bias) << "\n\n";
  out << "[frontier]\neta,treatment_influence,outcome_influence,delta\n";
  for (const auto& p : curve.frontier)
    out << format_number(p.eta) << ',' << format_number(p.treatment_influence) << ','
        << format_number(p.outcome_influence) << ',' << format_number(p.delta) << '\n';
  out << "\n[covariate_points]\ngroup,treatment_influence,outcome_influence,degenerate\n";
  for (const auto& c : curve.covariate_points)
    out << c.group << ',' << format_number(c.influence.treatment) << ',' << format_number(c.influence.outcome) << ','
        << (c.influence.degenerate ? "true" : "false") << '\n';
  if (!curve.bands.empty()) {
    out << "\n[bands]\neta,lo,hi\n";
    for (const auto& b : curve.bands)
      out << format_number(b.eta) << ',' << format_number(b.lo) << ',' << format_number(b.hi) << '\n';
  }
}

}  // namespace fairaudit
