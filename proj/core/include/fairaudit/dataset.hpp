#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fairaudit {

enum class CovariateKind { continuous, binary };

std::string_view to_string(CovariateKind kind);
CovariateKind covariate_kind_from_string(std::string_view text);

struct Covariate {
  std::string name;
  CovariateKind kind = CovariateKind::continuous;

  friend bool operator==(const Covariate&, const Covariate&) = default;
};

/// Ordered list of named covariates. Names are unique and the list is never
/// empty once constructed through the validating constructor.
class CovariateSchema {
 public:
  CovariateSchema() = default;
  explicit CovariateSchema(std::vector<Covariate> entries);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const Covariate& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<Covariate>& entries() const noexcept { return entries_; }
  std::vector<std::string> names() const;

  std::optional<std::size_t> find(std::string_view name) const;
  /// Index of `name`; throws DataError if absent.
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  CovariateSchema subset(std::span<const std::string> names) const;

  friend bool operator==(const CovariateSchema&, const CovariateSchema&) = default;

 private:
  std::vector<Covariate> entries_;
};

struct Observation {
  int y = 0;
  int z = 0;
  std::vector<double> x;

  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Immutable observational sample of (outcome, treatment, covariates).
class ObservationalDataset {
 public:
  ObservationalDataset() = default;
  ObservationalDataset(CovariateSchema schema, std::vector<Observation> rows,
                       std::optional<std::string> period = std::nullopt);

  const CovariateSchema& schema() const noexcept { return schema_; }
  const std::vector<Observation>& rows() const noexcept { return rows_; }
  const Observation& row(std::size_t i) const { return rows_[i]; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::optional<std::string>& period() const noexcept { return period_; }

  std::size_t count_treatment(int z) const;
  std::size_t treated_count() const { return count_treatment(1); }
  std::size_t control_count() const { return count_treatment(0); }

  /// Throws DataError unless both treatment groups are nonempty.
  void require_both_groups() const;

  std::vector<std::size_t> group_indices(int z) const;
  ObservationalDataset group(int z) const { return select(group_indices(z)); }

  ObservationalDataset select(std::span<const std::size_t> indices) const;
  ObservationalDataset select_covariates(std::span<const std::string> names) const;
  ObservationalDataset drop_covariates(std::span<const std::string> names) const;
  /// Swaps the role of the two groups (z -> 1 - z).
  ObservationalDataset with_flipped_treatment() const;
  ObservationalDataset with_period(std::optional<std::string> period) const;

  std::vector<double> column(std::size_t covariate) const;

 private:
  CovariateSchema schema_;
  std::vector<Observation> rows_;
  std::optional<std::string> period_;
};

// ---------------------------------------------------------------------------
// Tabular text ingestion

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;

  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t column_index(std::string_view name) const;
};

Table read_table(std::istream& in, char delimiter = ',');

enum class MissingPolicy { error, drop };

struct ColumnMap {
  std::string outcome = "y";
  std::string treatment = "z";
  /// Column name for each schema entry, in schema order. Empty means the
  /// column names equal the schema names.
  std::vector<std::string> covariates;
};

struct LoadOptions {
  char delimiter = ',';
  MissingPolicy missing = MissingPolicy::error;
};

bool is_missing_token(std::string_view cell);

ObservationalDataset dataset_from_table(const Table& table, const CovariateSchema& schema,
                                        const ColumnMap& columns,
                                        MissingPolicy missing = MissingPolicy::error);

ObservationalDataset load_dataset(std::istream& in, const CovariateSchema& schema,
                                  const ColumnMap& columns = {}, const LoadOptions& options = {});

/// Writes `y,z,<covariates...>` with full double precision so reloading
/// yields identical rows.
void save_dataset(std::ostream& out, const ObservationalDataset& data, char delimiter = ',');

// ---------------------------------------------------------------------------
// Normalization

/// Per-covariate divisor equal to the pooled observed range.
class NormalizationSpec {
 public:
  NormalizationSpec() = default;
  NormalizationSpec(std::vector<std::string> names, std::vector<double> scales);

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& scales() const noexcept { return scales_; }
  std::optional<double> scale_of(std::string_view name) const;

  ObservationalDataset apply(const ObservationalDataset& data) const;

 private:
  std::vector<std::string> names_;
  std::vector<double> scales_;
};

NormalizationSpec fit_normalization(const ObservationalDataset& data,
                                    std::span<const std::string> covariates);

/// Sidecar descriptor: names, kinds and (optionally) normalization scales.
nlohmann::json schema_descriptor(const CovariateSchema& schema,
                                 const NormalizationSpec* normalization = nullptr);
CovariateSchema schema_from_descriptor(const nlohmann::json& descriptor);

// ---------------------------------------------------------------------------
// Cohort filters and derived time covariates

/// Keeps rows whose age covariate is strictly greater than `threshold`.
ObservationalDataset filter_age_over(const ObservationalDataset& data, double threshold,
                                     std::string_view age_covariate = "age");

using Date = std::chrono::sys_days;

/// ISO-8601 calendar date (YYYY-MM-DD).
Date parse_date(std::string_view text);
std::string format_date(Date date);

struct PeriodBounds {
  Date start;
  Date end;

  PeriodBounds(Date start, Date end);
  bool contains(Date d) const { return start <= d && d <= end; }
};

struct DatedRecord {
  Date test;
  std::optional<Date> hospitalisation;
};

struct TimeCovariates {
  double time_until_test = 0.0;
  std::optional<double> time_until_hosp;
  std::optional<double> time_positive_to_hosp;
  /// Hospitalisation precedes the positive test by more than the allowed
  /// window. Flagged rows must be excluded by the caller.
  bool flagged = false;
};

inline constexpr int kPrePositiveWindowDays = 21;

/// Day offsets relative to the earliest positive test among `records`.
/// Throws DataError if a test date lies outside `period`.
std::vector<TimeCovariates> derive_time_covariates(std::span<const DatedRecord> records,
                                                   const PeriodBounds& period,
                                                   int pre_positive_window_days = kPrePositiveWindowDays);

}  // namespace fairaudit
