#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fairaudit/battery.hpp"
#include "fairaudit/dataset.hpp"
#include "fairaudit/diagnostics.hpp"
#include "fairaudit/scenario.hpp"
#include "fairaudit/sensitivity.hpp"

namespace fairaudit::cli {

struct OutcomeSpec {
  std::string name;
  std::string column;
  OutcomeKind kind = OutcomeKind::hospitalisation_death;
};

/// One analysis period: either a delimited file or an inline scenario.
struct PeriodSpec {
  std::string name;
  std::filesystem::path input;
  std::optional<ScenarioSpec> scenario;
  /// Row 1..4 of the trim table and distance-weight defaults; 0 means the
  /// config must give explicit trims.
  int trim_period = 1;
};

enum class WeightPreset { unit, in_hospital, custom };

struct DiagnoseSettings {
  std::size_t permutations = 200;
  double level = 0.05;
  std::optional<double> sigma;
  /// Larger samples are resampled to this size for MMD and W2.
  std::size_t max_rows = 3000;
  std::size_t grid_size = kTvGridSize;
};

struct SensitivitySettings {
  std::size_t grid_size = 20;
  double eta_min = 0.01;
  double eta_max = 0.95;
  std::size_t draws = 1000;
  std::size_t band_replicates = 50;
  std::size_t band_draws = 100;
  double band_level = 0.95;
  /// Empty means one group per covariate.
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  std::optional<double> target_bias;
  ModelConfig propensity_family = LogisticConfig{};
  ModelConfig outcome_family = LogisticConfig{};
};

struct AuditConfig {
  std::vector<PeriodSpec> periods;
  std::vector<OutcomeSpec> outcomes;
  std::optional<CovariateSchema> schema;
  std::string treatment_column = "z";
  /// Schema name -> file column where they differ.
  std::map<std::string, std::string> covariate_columns;
  LoadOptions load;
  std::optional<double> age_over;
  std::string age_covariate = "age";

  /// Template for every (outcome, period) cell. Trim period, outcome kind,
  /// distance weights, seed and jobs are filled per cell.
  BatteryConfig battery;
  WeightPreset weight_preset = WeightPreset::unit;

  std::vector<MatchVariant> match_variants{MatchVariant::euclidean, MatchVariant::euclidean2,
                                           MatchVariant::propensity, MatchVariant::propensity2};
  DiagnoseSettings diagnose;
  SensitivitySettings sensitivity;

  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path output_dir = "fairaudit-out";
  /// Config as read, minus run-placement keys; hashed into output headers.
  nlohmann::json canonical;
};

/// Parses the JSON config. Relative paths resolve against `base_dir`.
AuditConfig parse_audit_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
AuditConfig load_audit_config(const std::filesystem::path& path);

/// Reads and parses a JSON file; ConfigError on failure.
nlohmann::json read_json_file(const std::filesystem::path& path);

std::uint64_t config_hash(const AuditConfig& config);

}  // namespace fairaudit::cli
