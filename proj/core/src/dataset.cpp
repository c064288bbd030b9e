#include "fairaudit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "fairaudit/errors.hpp"

namespace fairaudit {

std::string_view to_string(CovariateKind kind) {
  return kind == CovariateKind::binary ? "binary" : "continuous";
}

CovariateKind covariate_kind_from_string(std::string_view text) {
  if (text == "binary") return CovariateKind::binary;
  if (text == "continuous") return CovariateKind::continuous;
  throw ConfigError("unknown covariate kind '" + std::string(text) + "'");
}

CovariateSchema::CovariateSchema(std::vector<Covariate> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DataError("covariate schema must contain at least one covariate");
  std::set<std::string> seen;
  for (const auto& c : entries_) {
    if (c.name.empty()) throw DataError("covariate name must not be empty");
    if (!seen.insert(c.name).second) throw DataError("duplicate covariate name '" + c.name + "'");
  }
}

std::vector<std::string> CovariateSchema::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& c : entries_) out.push_back(c.name);
  return out;
}

std::optional<std::size_t> CovariateSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

std::size_t CovariateSchema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw DataError("covariate '" + std::string(name) + "' not in schema");
}

CovariateSchema CovariateSchema::subset(std::span<const std::string> names) const {
  std::vector<Covariate> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(entries_[index_of(n)]);
  return CovariateSchema(std::move(out));
}

// ---------------------------------------------------------------------------

ObservationalDataset::ObservationalDataset(CovariateSchema schema, std::vector<Observation> rows,
                                           std::optional<std::string> period)
    : schema_(std::move(schema)), rows_(std::move(rows)), period_(std::move(period)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.x.size() != schema_.size())
      throw DataError("row " + std::to_string(i) + " has " + std::to_string(r.x.size()) +
                      " covariates, schema has " + std::to_string(schema_.size()));
    if (r.y != 0 && r.y != 1) throw DataError("outcome not in {0,1} at row " + std::to_string(i));
    if (r.z != 0 && r.z != 1) throw DataError("treatment not in {0,1} at row " + std::to_string(i));
    for (double v : r.x)
      if (!std::isfinite(v)) throw DataError("non-finite covariate at row " + std::to_string(i));
  }
}

std::size_t ObservationalDataset::count_treatment(int z) const {
  return static_cast<std::size_t>(
      std::count_if(rows_.begin(), rows_.end(), [z](const Observation& r) { return r.z == z; }));
}

void ObservationalDataset::require_both_groups() const {
  if (treated_count() == 0) throw DataError("treated group (z=1) is empty");
  if (control_count() == 0) throw DataError("control group (z=0) is empty");
}

std::vector<std::size_t> ObservationalDataset::group_indices(int z) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (rows_[i].z == z) out.push_back(i);
  return out;
}

ObservationalDataset ObservationalDataset::select(std::span<const std::size_t> indices) const {
  std::vector<Observation> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(rows_.at(i));
  ObservationalDataset d;
  d.schema_ = schema_;
  d.rows_ = std::move(out);
  d.period_ = period_;
  return d;
}

ObservationalDataset ObservationalDataset::select_covariates(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(schema_.index_of(n));
  std::vector<Observation> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) {
    Observation o{r.y, r.z, {}};
    o.x.reserve(idx.size());
    for (auto k : idx) o.x.push_back(r.x[k]);
    out.push_back(std::move(o));
  }
  return ObservationalDataset(schema_.subset(names), std::move(out), period_);
}

ObservationalDataset ObservationalDataset::drop_covariates(std::span<const std::string> names) const {
  for (const auto& n : names) (void)schema_.index_of(n);
  std::vector<std::string> keep;
  for (const auto& c : schema_.entries())
    if (std::find(names.begin(), names.end(), c.name) == names.end()) keep.push_back(c.name);
  if (keep.empty()) throw DataError("cannot drop every covariate");
  return select_covariates(keep);
}

ObservationalDataset ObservationalDataset::with_flipped_treatment() const {
  ObservationalDataset d = *this;
  for (auto& r : d.rows_) r.z = 1 - r.z;
  return d;
}

ObservationalDataset ObservationalDataset::with_period(std::optional<std::string> period) const {
  ObservationalDataset d = *this;
  d.period_ = std::move(period);
  return d;
}

std::vector<double> ObservationalDataset::column(std::size_t covariate) const {
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.x.at(covariate));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::column_index(std::string_view name) const {
  if (auto i = find_column(name)) return *i;
  throw DataError("missing column '" + std::string(name) + "'");
}

Table read_table(std::istream& in, char delimiter) {
  Table t;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    if (!have_header && line.rfind('#', 0) == 0) continue;  // leading comment block
    auto fields = split_line(line, delimiter);
    for (auto& f : fields) f = std::string(trim(f));
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    t.cells.push_back(std::move(fields));
  }
  if (!have_header) throw DataError("input has no header row");
  return t;
}

bool is_missing_token(std::string_view cell) {
  cell = trim(cell);
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

ObservationalDataset dataset_from_table(const Table& table, const CovariateSchema& schema,
                                        const ColumnMap& columns, MissingPolicy missing) {
  if (schema.empty()) throw DataError("empty covariate schema");
  if (!columns.covariates.empty() && columns.covariates.size() != schema.size())
    throw ConfigError("column map lists " + std::to_string(columns.covariates.size()) +
                      " covariate columns, schema has " + std::to_string(schema.size()));
  const std::size_t y_col = table.column_index(columns.outcome);
  const std::size_t z_col = table.column_index(columns.treatment);
  std::vector<std::size_t> x_cols;
  for (std::size_t k = 0; k < schema.size(); ++k)
    x_cols.push_back(table.column_index(columns.covariates.empty() ? schema[k].name
                                                                   : columns.covariates[k]));

  auto binary = [](std::string_view cell) -> std::optional<int> {
    auto v = parse_double(cell);
    if (!v) return std::nullopt;
    if (*v == 0.0) return 0;
    if (*v == 1.0) return 1;
    return -1;
  };

  std::vector<Observation> rows;
  rows.reserve(table.cells.size());
  for (std::size_t r = 0; r < table.cells.size(); ++r) {
    const auto& cells = table.cells[r];
    const std::string where = " at data row " + std::to_string(r + 1);
    bool has_missing = false;
    for (auto c : x_cols) has_missing = has_missing || is_missing_token(cells[c]);
    has_missing = has_missing || is_missing_token(cells[y_col]) || is_missing_token(cells[z_col]);
    if (has_missing) {
      if (missing == MissingPolicy::drop) continue;
      throw DataError("missing value" + where);
    }
    Observation o;
    auto y = binary(cells[y_col]);
    if (!y) throw DataError("unparseable outcome '" + cells[y_col] + "'" + where);
    if (*y < 0) throw DataError("outcome not in {0,1}" + where);
    auto z = binary(cells[z_col]);
    if (!z) throw DataError("unparseable treatment '" + cells[z_col] + "'" + where);
    if (*z < 0) throw DataError("treatment not in {0,1}" + where);
    o.y = *y;
    o.z = *z;
    o.x.reserve(x_cols.size());
    for (std::size_t k = 0; k < x_cols.size(); ++k) {
      auto v = parse_double(cells[x_cols[k]]);
      if (!v) {
        if (missing == MissingPolicy::drop) break;
        throw DataError("unparseable value '" + cells[x_cols[k]] + "' in column '" +
                        table.header[x_cols[k]] + "'" + where);
      }
      if (schema[k].kind == CovariateKind::binary && *v != 0.0 && *v != 1.0)
        throw DataError("binary covariate '" + schema[k].name + "' not in {0,1}" + where);
      o.x.push_back(*v);
    }
    if (o.x.size() != x_cols.size()) continue;
    rows.push_back(std::move(o));
  }
  if (rows.empty()) throw DataError("empty dataset");
  return ObservationalDataset(schema, std::move(rows));
}

ObservationalDataset load_dataset(std::istream& in, const CovariateSchema& schema,
                                  const ColumnMap& columns, const LoadOptions& options) {
  return dataset_from_table(read_table(in, options.delimiter), schema, columns, options.missing);
}

void save_dataset(std::ostream& out, const ObservationalDataset& data, char delimiter) {
  out << "y" << delimiter << "z";
  for (const auto& c : data.schema().entries()) out << delimiter << c.name;
  out << '\n';
  char buf[64];
  for (const auto& r : data.rows()) {
    out << r.y << delimiter << r.z;
    for (double v : r.x) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
      out << delimiter << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

NormalizationSpec::NormalizationSpec(std::vector<std::string> names, std::vector<double> scales)
    : names_(std::move(names)), scales_(std::move(scales)) {
  if (names_.size() != scales_.size()) throw DataError("normalization names/scales length mismatch");
  for (std::size_t i = 0; i < scales_.size(); ++i)
    if (!(scales_[i] > 0.0) || !std::isfinite(scales_[i]))
      throw DataError("normalization scale for '" + names_[i] + "' must be positive");
}

std::optional<double> NormalizationSpec::scale_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return scales_[i];
  return std::nullopt;
}

ObservationalDataset NormalizationSpec::apply(const ObservationalDataset& data) const {
  std::vector<std::pair<std::size_t, double>> cols;
  for (std::size_t i = 0; i < names_.size(); ++i)
    cols.emplace_back(data.schema().index_of(names_[i]), scales_[i]);
  std::vector<Observation> rows = data.rows();
  for (auto& r : rows)
    for (auto [k, s] : cols) r.x[k] /= s;
  return ObservationalDataset(data.schema(), std::move(rows), data.period());
}

NormalizationSpec fit_normalization(const ObservationalDataset& data,
                                    std::span<const std::string> covariates) {
  if (data.empty()) throw DataError("cannot fit normalization on an empty dataset");
  std::vector<std::string> names;
  std::vector<double> scales;
  for (const auto& name : covariates) {
    const auto k = data.schema().index_of(name);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : data.rows()) {
      lo = std::min(lo, r.x[k]);
      hi = std::max(hi, r.x[k]);
    }
    if (!(hi > lo)) throw DataError("covariate '" + name + "' is constant; cannot normalize");
    names.push_back(name);
    scales.push_back(hi - lo);
  }
  return NormalizationSpec(std::move(names), std::move(scales));
}

nlohmann::json schema_descriptor(const CovariateSchema& schema, const NormalizationSpec* normalization) {
  nlohmann::json covs = nlohmann::json::array();
  for (const auto& c : schema.entries()) {
    nlohmann::json e{{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
    if (normalization)
      if (auto s = normalization->scale_of(c.name)) e["scale"] = *s;
    covs.push_back(std::move(e));
  }
  return nlohmann::json{{"outcome", "y"}, {"treatment", "z"}, {"covariates", std::move(covs)}};
}

CovariateSchema schema_from_descriptor(const nlohmann::json& descriptor) {
  if (!descriptor.contains("covariates") || !descriptor["covariates"].is_array())
    throw ConfigError("schema descriptor lacks a 'covariates' array");
  std::vector<Covariate> out;
  for (const auto& e : descriptor["covariates"]) {
    if (e.is_string()) {
      out.push_back({e.get<std::string>(), CovariateKind::continuous});
      continue;
    }
    out.push_back({e.at("name").get<std::string>(),
                   covariate_kind_from_string(e.value("kind", std::string("continuous")))});
  }
  return CovariateSchema(std::move(out));
}

ObservationalDataset filter_age_over(const ObservationalDataset& data, double threshold,
                                     std::string_view age_covariate) {
  const auto k = data.schema().index_of(age_covariate);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.row(i).x[k] > threshold) keep.push_back(i);
  return data.select(keep);
}

}  // namespace fairaudit
