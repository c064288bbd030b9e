#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairaudit/battery.hpp"
#include "fairaudit/dataset.hpp"
#include "fairaudit/estimators.hpp"
#include "fairaudit/models.hpp"

namespace fairaudit {

/// eta sets how strongly the latent propensity departs from e(X); delta is
/// the outcome coefficient on logit of the latent propensity.
struct SensitivityParams {
  double eta = 0.1;
  double delta = 0.0;

  void validate() const;
};

struct LatentDrawConfig {
  std::size_t draws = 1000;
  std::uint64_t seed = 0;
};

/// Draws of the latent propensity ~ Beta(e (1 - eta) / eta, (1 - e)(1 - eta) / eta).
std::vector<double> simulate_latent_propensity(double e, double eta, std::size_t draws, std::uint64_t seed);
std::vector<double> simulate_latent_propensity(const PropensityModel& propensity, double eta,
                                               std::span<const double> x, std::size_t draws, std::uint64_t seed);

/// Per-row Monte-Carlo moments of logit of the latent propensity given the
/// row's covariates and either treatment value.
struct LatentLogitMoments {
  /// mean over rows of E[logit | Z = 1, x] - E[logit | Z = 0, x]
  double gap = 0.0;
  /// mean over rows of Var(logit | Z = z_i, x_i)
  double conditional_variance = 0.0;
};

LatentLogitMoments latent_logit_moments(double eta, const ObservationalDataset& data,
                                        std::span<const double> propensity, const LatentDrawConfig& draws);

/// |delta| times the logit gap.
double bias_of(const SensitivityParams& params, const ObservationalDataset& data, const PropensityModel& propensity,
               const LatentDrawConfig& draws = {});

struct DeltaRequired {
  double delta = 0.0;
  /// The logit gap vanished so no finite delta produces the target.
  bool unbounded = false;
};

DeltaRequired delta_required(double eta, double target_bias, const ObservationalDataset& data,
                             const PropensityModel& propensity, const LatentDrawConfig& draws = {});

struct GroupInfluence {
  double treatment = 0.0;
  double outcome = 0.0;
  /// The group held every covariate, so the reduced models are intercept-only.
  bool degenerate = false;
};

/// Held-out loss improvement from adding `group` back to the propensity
/// (log-loss) and outcome (squared error) models, floored at 0.
GroupInfluence influence_of_group(const ObservationalDataset& data, std::span<const std::string> group,
                                  const ModelConfig& propensity_family, const ModelConfig& outcome_family,
                                  int folds = 5, std::uint64_t seed = 0);

/// Smallest shift of every point estimate toward 0 that puts 0 inside at
/// least ceil(K/2) intervals. Empty when that already holds or fewer than two
/// intervals exclude 0.
std::optional<double> target_bias(std::span<const AteEstimate> estimates);

struct FrontierPoint {
  double eta = 0.0;
  double treatment_influence = 0.0;
  double outcome_influence = 0.0;
  double delta = 0.0;
};

struct CovariatePoint {
  std::string group;
  GroupInfluence influence;
};

struct BandPoint {
  double eta = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct AustenCurve {
  double target_bias = 0.0;
  bool vacuous = false;
  std::vector<FrontierPoint> frontier;
  std::vector<CovariatePoint> covariate_points;
  std::vector<BandPoint> bands;
  std::vector<std::string> warnings;
};

struct AustenConfig {
  std::size_t grid_size = 20;
  double eta_min = 0.01;
  double eta_max = 0.95;
  LatentDrawConfig draws;
  /// Named covariate groups plotted for reference.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  /// 0 disables bands.
  std::size_t band_replicates = 0;
  double band_level = 0.95;
  std::size_t band_draws = 100;
  ModelConfig propensity_family = LogisticConfig{};
  ModelConfig outcome_family = LogisticConfig{};
  double propensity_clip = 0.01;
  double outcome_clip = 1e-6;
  int folds = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  /// Overrides the target derived from the estimates.
  std::optional<double> target_bias;
};

std::vector<double> eta_grid(std::size_t size, double lo, double hi);

AustenCurve austen_curve(const ObservationalDataset& data, std::span<const AteEstimate> estimates,
                         const PropensityModel& propensity, const OutcomeModel& outcome, const AustenConfig& config);

/// Sensitivity parameters implied by a known confounder: compares models fit
/// with and without it. eta is the variance of the full-model propensity
/// around the reduced one relative to e(1 - e); delta is the slope of the
/// outcome difference on logit of the full propensity, centered within z.
SensitivityParams calibrate_sensitivity(const ObservationalDataset& data, std::span<const double> full_propensity,
                                        std::span<const double> reduced_propensity,
                                        std::span<const double> full_outcome,
                                        std::span<const double> reduced_outcome);

nlohmann::json to_json(const AustenCurve& curve);
/// CSV sections: frontier, covariate points, bands.
void write_austen_curve(std::ostream& out, const AustenCurve& curve);

}  // namespace fairaudit
