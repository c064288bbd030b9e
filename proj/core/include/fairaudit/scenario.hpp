#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"
#include "fairaudit/models.hpp"

namespace fairaudit {

enum class Distribution { normal, uniform, bernoulli };

struct CovariateGenerator {
  std::string name;
  Distribution distribution = Distribution::normal;
  /// normal: mean, sd; uniform: lower, upper; bernoulli: p, unused.
  double a = 0.0;
  double b = 1.0;
};

/// lo + (hi - lo) * sigmoid(intercept + coefficients . x + u_coefficient * u)
struct ProbabilityForm {
  double lo = 0.0;
  double hi = 1.0;
  double intercept = 0.0;
  std::vector<double> coefficients;
  double u_coefficient = 0.0;

  double operator()(std::span<const double> x, double u) const;
};

/// Synthetic observational study. A latent U ~ N(0, 1) is drawn for every
/// row whether or not it enters the forms, so turning its coefficients off
/// leaves the other draws unchanged.
struct ScenarioSpec {
  std::size_t n = 1000;
  std::vector<CovariateGenerator> covariates;
  /// Treatment probability; clamped to [0.02, 0.98].
  ProbabilityForm propensity;
  ProbabilityForm outcome0;
  /// When empty, p1 = p0 + shift.
  std::optional<ProbabilityForm> outcome1;
  double shift = 0.0;
  /// Append U as a covariate named "u".
  bool emit_u = false;
  std::uint64_t seed = 0;

  void validate() const;
  CovariateSchema schema() const;
  double propensity_at(std::span<const double> x, double u) const;
  double outcome_at(int z, std::span<const double> x, double u) const;
  bool has_hidden_confounding() const;
};

inline constexpr double kPropensityBound = 0.02;

ObservationalDataset generate(const ScenarioSpec& spec);

struct TrueAte {
  double value = 0.0;
  double standard_error = 0.0;
  bool analytic = false;
};

/// E_X[p1(X) - p0(X)]: exact for shift-form outcomes, otherwise Monte-Carlo
/// with `draws` samples.
TrueAte true_ate(const ScenarioSpec& spec, std::size_t draws = 1000000);

/// Ground-truth nuisance models; throw when U enters the forms.
PropensityModel oracle_propensity(const ScenarioSpec& spec, double clip = 0.01);
OutcomeModel oracle_outcome(const ScenarioSpec& spec, double clip = 1e-6);

std::vector<std::string> preset_names();
/// null-randomized, confounded-shift, confounded-null, hidden-confounder.
ScenarioSpec preset(std::string_view name, std::size_t n = 5000, std::uint64_t seed = 0);

/// Either {"preset": name, "n": .., "seed": .., "emit_u": ..} or a full spec.
ScenarioSpec scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioSpec& spec);

}  // namespace fairaudit
