#include "fairaudit/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "fairaudit/errors.hpp"
#include "fairaudit/random.hpp"
#include "network_simplex.hpp"

namespace fairaudit {

// ---------------------------------------------------------------------------
// Costs

CostMatrix CostMatrix::from_values(std::size_t rows, std::size_t cols, std::vector<double> values) {
  CostMatrix c;
  c.rows = rows;
  c.cols = cols;
  c.values = std::move(values);
  c.validate();
  return c;
}

void CostMatrix::validate() const {
  if (values.size() != rows * cols) throw EstimationError("cost matrix size mismatch");
  for (double v : values)
    if (!std::isfinite(v) || v < 0.0) throw EstimationError("cost entries must be finite and nonnegative");
}

CostMatrix build_cost_euclidean(const ObservationalDataset& group0, const ObservationalDataset& group1,
                                const NormalizationSpec& normalization, std::span<const std::string> covariates,
                                std::span<const double> weights) {
  if (group0.empty() || group1.empty()) throw DataError("both groups must be nonempty to build a cost matrix");
  if (weights.size() != covariates.size())
    throw ConfigError("distance weights length differs from covariate count");
  std::vector<std::size_t> idx0, idx1;
  std::vector<double> factor;
  for (std::size_t k = 0; k < covariates.size(); ++k) {
    const auto scale = normalization.scale_of(covariates[k]);
    if (!scale) throw ConfigError("normalization lacks covariate '" + covariates[k] + "'");
    if (!(weights[k] >= 0.0)) throw ConfigError("distance weights must be nonnegative");
    idx0.push_back(group0.schema().index_of(covariates[k]));
    idx1.push_back(group1.schema().index_of(covariates[k]));
    factor.push_back(weights[k] / *scale);
  }
  CostMatrix c;
  c.rows = group0.size();
  c.cols = group1.size();
  c.kind = CostKind::euclidean;
  c.weights.assign(weights.begin(), weights.end());
  c.values.resize(c.rows * c.cols);
  for (std::size_t i = 0; i < c.rows; ++i) {
    const auto& a = group0.row(i).x;
    for (std::size_t j = 0; j < c.cols; ++j) {
      const auto& b = group1.row(j).x;
      double d2 = 0.0;
      for (std::size_t k = 0; k < factor.size(); ++k) {
        const double d = factor[k] * (a[idx0[k]] - b[idx1[k]]);
        d2 += d * d;
      }
      c.values[i * c.cols + j] = d2;
    }
  }
  return c;
}

CostMatrix build_cost_propensity(const ObservationalDataset& group0, const ObservationalDataset& group1,
                                 const PropensityModel& model) {
  if (group0.empty() || group1.empty()) throw DataError("both groups must be nonempty to build a cost matrix");
  const auto e0 = model.predict_all(group0);
  const auto e1 = model.predict_all(group1);
  CostMatrix c;
  c.rows = e0.size();
  c.cols = e1.size();
  c.kind = CostKind::propensity;
  c.values.resize(c.rows * c.cols);
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) c.values[i * c.cols + j] = std::abs(e0[i] - e1[j]);
  return c;
}

// ---------------------------------------------------------------------------
// Solvers

void TrimSpec::validate() const {
  if (!(alpha0 >= 0.0 && alpha0 < 1.0) || !(alpha1 >= 0.0 && alpha1 < 1.0))
    throw ConfigError("trim fractions must lie in [0, 1)");
}

double TransportPlan::row_sum(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j <= n1; ++j) s += (*this)(i, j);
  return s;
}

double TransportPlan::col_sum(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i <= n0; ++i) s += (*this)(i, j);
  return s;
}

double TransportPlan::real_row_mass(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < n1; ++j) s += (*this)(i, j);
  return s;
}

double TransportPlan::real_col_mass(std::size_t j) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n0; ++i) s += (*this)(i, j);
  return s;
}

namespace {

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

TransportSolution solve_entropic(std::size_t rows, std::size_t cols, std::span<const double> cost,
                                 std::span<const double> supply, std::span<const double> demand,
                                 const TransportOptions& options) {
  double max_cost = 0.0;
  for (double c : cost)
    if (std::isfinite(c)) max_cost = std::max(max_cost, c);
  const double eps = options.entropic_epsilon * (max_cost > 0.0 ? max_cost : 1.0);
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> f(rows, 0.0), g(cols, 0.0), buf(std::max(rows, cols));
  double total = 0.0;
  for (double a : supply) total += a;

  std::size_t it = 0;
  double error = std::numeric_limits<double>::infinity();
  for (; it < options.entropic_max_iterations && error > options.entropic_tolerance * total; ++it) {
    for (std::size_t i = 0; i < rows; ++i) {
      if (supply[i] <= 0.0) {
        f[i] = neg_inf;
        continue;
      }
      for (std::size_t j = 0; j < cols; ++j) {
        const double c = cost[i * cols + j];
        buf[j] = std::isfinite(c) && std::isfinite(g[j]) ? (g[j] - c) / eps : neg_inf;
      }
      f[i] = eps * (std::log(supply[i]) - log_sum_exp(std::span<const double>(buf.data(), cols)));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      if (demand[j] <= 0.0) {
        g[j] = neg_inf;
        continue;
      }
      for (std::size_t i = 0; i < rows; ++i) {
        const double c = cost[i * cols + j];
        buf[i] = std::isfinite(c) && std::isfinite(f[i]) ? (f[i] - c) / eps : neg_inf;
      }
      g[j] = eps * (std::log(demand[j]) - log_sum_exp(std::span<const double>(buf.data(), rows)));
    }
    error = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        const double c = cost[i * cols + j];
        if (std::isfinite(c) && std::isfinite(f[i]) && std::isfinite(g[j])) s += std::exp((f[i] + g[j] - c) / eps);
      }
      error += std::abs(s - supply[i]);
    }
  }
  if (error > options.entropic_tolerance * total)
    throw EstimationError("entropic transport did not converge after " + std::to_string(it) +
                          " iterations (marginal error " + std::to_string(error) + ")");
  TransportSolution sol;
  sol.iterations = it;
  sol.flow.assign(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double c = cost[i * cols + j];
      if (std::isfinite(c) && std::isfinite(f[i]) && std::isfinite(g[j])) {
        const double p = std::exp((f[i] + g[j] - c) / eps);
        sol.flow[i * cols + j] = p;
        sol.objective += p * c;
      }
    }
  return sol;
}

}  // namespace

TransportSolution solve_transport(std::size_t rows, std::size_t cols, std::span<const double> cost,
                                  std::span<const double> supply, std::span<const double> demand,
                                  const TransportOptions& options) {
  if (rows == 0 || cols == 0) throw EstimationError("transport problem needs at least one row and column");
  if (cost.size() != rows * cols || supply.size() != rows || demand.size() != cols)
    throw EstimationError("transport problem dimensions are inconsistent");
  double total_supply = 0.0, total_demand = 0.0;
  for (double a : supply) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw EstimationError("supplies must be finite and nonnegative");
    total_supply += a;
  }
  for (double b : demand) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw EstimationError("demands must be finite and nonnegative");
    total_demand += b;
  }
  if (!(total_supply > 0.0) || std::abs(total_supply - total_demand) > 1e-9 * total_supply)
    throw EstimationError("transport marginals must have equal positive totals");
  for (double c : cost)
    if (std::isnan(c) || c < 0.0 || c == -kForbidden) throw EstimationError("costs must be nonnegative");

  if (options.method == TransportMethod::entropic) return solve_entropic(rows, cols, cost, supply, demand, options);

  const std::size_t cap = options.max_iterations > 0
                              ? options.max_iterations
                              : std::max<std::size_t>(100000, 50 * rows * cols + 50 * (rows + cols));
  auto result = detail::network_simplex_transport(rows, cols, cost, supply, demand, cap);
  if (result.unmet_mass > 1e-9 * total_supply)
    throw EstimationError("transport problem is infeasible (unmatched mass " + std::to_string(result.unmet_mass) +
                          ")");
  return {std::move(result.flow), result.objective, result.iterations};
}

TransportPlan solve_trimmed_transport(const CostMatrix& cost, const TrimSpec& trim, const TransportOptions& options) {
  cost.validate();
  trim.validate();
  const std::size_t n0 = cost.rows, n1 = cost.cols;
  if (n0 == 0 || n1 == 0) throw EstimationError("trimmed transport needs nonempty groups");
  const std::size_t rows = n0 + 1, cols = n1 + 1;

  std::vector<double> extended(rows * cols, 0.0);
  for (std::size_t i = 0; i < n0; ++i)
    std::copy_n(cost.values.begin() + static_cast<std::ptrdiff_t>(i * n1), n1,
                extended.begin() + static_cast<std::ptrdiff_t>(i * cols));
  extended[rows * cols - 1] = kForbidden;

  std::vector<double> supply(rows, (1.0 / static_cast<double>(n0)) / (1.0 - trim.alpha0));
  std::vector<double> demand(cols, (1.0 / static_cast<double>(n1)) / (1.0 - trim.alpha1));
  supply.back() = trim.alpha1 / (1.0 - trim.alpha1);
  demand.back() = trim.alpha0 / (1.0 - trim.alpha0);

  auto sol = solve_transport(rows, cols, extended, supply, demand, options);
  TransportPlan plan;
  plan.n0 = n0;
  plan.n1 = n1;
  plan.mass = std::move(sol.flow);
  plan.mass.back() = 0.0;
  plan.trim = trim;
  plan.objective = sol.objective;
  plan.iterations = sol.iterations;
  return plan;
}

std::pair<WeightedSample, WeightedSample> matched_weighted_samples(const TransportPlan& plan,
                                                                   const ObservationalDataset& group0,
                                                                   const ObservationalDataset& group1) {
  if (plan.n0 != group0.size() || plan.n1 != group1.size())
    throw EstimationError("transport plan dimensions do not match the groups");
  std::vector<double> w0(plan.n0), w1(plan.n1);
  for (std::size_t i = 0; i < plan.n0; ++i) w0[i] = std::max(0.0, plan.real_row_mass(i));
  for (std::size_t j = 0; j < plan.n1; ++j) w1[j] = std::max(0.0, plan.real_col_mass(j));

  auto build = [](const ObservationalDataset& g, std::vector<double> w) {
    WeightedSample s;
    s.schema = g.schema();
    s.rows = g.rows();
    s.weights = normalize_weights(std::move(w));
    s.source_index.resize(g.size());
    std::iota(s.source_index.begin(), s.source_index.end(), 0);
    return s;
  };
  return {build(group0, std::move(w0)), build(group1, std::move(w1))};
}

// ---------------------------------------------------------------------------
// Defaults

std::string_view to_string(MatchVariant v) {
  switch (v) {
    case MatchVariant::euclidean: return "MatchedEuc";
    case MatchVariant::euclidean2: return "MatchedEuc2";
    case MatchVariant::propensity: return "MatchedProp";
    case MatchVariant::propensity2: return "MatchedProp2";
  }
  return "?";
}

MatchVariant match_variant_from_string(std::string_view s) {
  for (auto v : {MatchVariant::euclidean, MatchVariant::euclidean2, MatchVariant::propensity,
                 MatchVariant::propensity2})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown matching variant '" + std::string(s) + "'");
}

std::string_view to_string(OutcomeKind k) {
  return k == OutcomeKind::hospitalisation_death ? "hospitalisation_death" : "death_in_hospital";
}

OutcomeKind outcome_kind_from_string(std::string_view s) {
  if (s == "hospitalisation_death" || s == "hospitalisation" || s == "death") return OutcomeKind::hospitalisation_death;
  if (s == "death_in_hospital" || s == "in_hospital_death") return OutcomeKind::death_in_hospital;
  throw ConfigError("unknown outcome kind '" + std::string(s) + "'");
}

TrimTable::TrimTable() {
  using V = MatchVariant;
  using K = OutcomeKind;
  const TrimSpec general_single[4] = {{0.4234, 0.0}, {0.8791, 0.0}, {0.9530, 0.0}, {0.9590, 0.0}};
  const TrimSpec general_euc2[4] = {{0.85, 0.75}, {0.9099, 0.075}, {0.9625, 0.075}, {0.9686, 0.075}};
  const TrimSpec general_prop2[4] = {{0.70, 0.60}, {0.9099, 0.075}, {0.9625, 0.075}, {0.9686, 0.075}};
  const TrimSpec hosp_single[4] = {{0.8126, 0.0}, {0.8836, 0.0}, {0.9535, 0.0}, {0.9267, 0.0}};
  const TrimSpec hosp_euc2[4] = {{0.8736, 0.30}, {0.9720, 0.075}, {0.9630, 0.075}, {0.9360, 0.075}};
  const TrimSpec hosp_prop2[4] = {{0.8736, 0.30}, {0.8924, 0.075}, {0.9630, 0.075}, {0.9360, 0.075}};
  for (int p = 1; p <= 4; ++p) {
    const auto k = static_cast<std::size_t>(p - 1);
    set(V::euclidean, K::hospitalisation_death, p, general_single[k]);
    set(V::euclidean2, K::hospitalisation_death, p, general_euc2[k]);
    set(V::propensity, K::hospitalisation_death, p, general_single[k]);
    set(V::propensity2, K::hospitalisation_death, p, general_prop2[k]);
    set(V::euclidean, K::death_in_hospital, p, hosp_single[k]);
    set(V::euclidean2, K::death_in_hospital, p, hosp_euc2[k]);
    set(V::propensity, K::death_in_hospital, p, hosp_single[k]);
    set(V::propensity2, K::death_in_hospital, p, hosp_prop2[k]);
  }
}

void TrimTable::set(MatchVariant variant, OutcomeKind kind, int period, TrimSpec trim) {
  if (period < 1 || period > 4) throw ConfigError("trim table period must be 1..4");
  trim.validate();
  table_[static_cast<int>(kind)][static_cast<int>(variant)][period - 1] = trim;
}

TrimSpec TrimTable::lookup(MatchVariant variant, OutcomeKind kind, int period) const {
  if (period < 1 || period > 4) throw ConfigError("trim table has no period " + std::to_string(period));
  return table_[static_cast<int>(kind)][static_cast<int>(variant)][period - 1];
}

TrimTable TrimTable::from_json(const nlohmann::json& j) {
  TrimTable t;
  for (const auto& [kind_name, variants] : j.items()) {
    const auto kind = outcome_kind_from_string(kind_name);
    for (const auto& [variant_name, periods] : variants.items()) {
      const auto variant = match_variant_from_string(variant_name);
      if (!periods.is_array() || periods.size() != 4)
        throw ConfigError("trim table entry " + kind_name + "/" + variant_name + " needs 4 periods");
      for (int p = 0; p < 4; ++p)
        t.set(variant, kind, p + 1,
              TrimSpec{periods[static_cast<std::size_t>(p)].at(0).get<double>(),
                       periods[static_cast<std::size_t>(p)].at(1).get<double>()});
    }
  }
  return t;
}

nlohmann::json TrimTable::to_json() const {
  nlohmann::json j;
  for (auto kind : {OutcomeKind::hospitalisation_death, OutcomeKind::death_in_hospital})
    for (auto variant : {MatchVariant::euclidean, MatchVariant::euclidean2, MatchVariant::propensity,
                         MatchVariant::propensity2}) {
      nlohmann::json periods = nlohmann::json::array();
      for (int p = 1; p <= 4; ++p) {
        const auto t = lookup(variant, kind, p);
        periods.push_back({t.alpha0, t.alpha1});
      }
      j[std::string(to_string(kind))][std::string(to_string(variant))] = std::move(periods);
    }
  return j;
}

TrimSpec default_trim_levels(MatchVariant variant, OutcomeKind kind, int period) {
  static const TrimTable table;
  return table.lookup(variant, kind, period);
}

DistanceWeights in_hospital_distance_weights(int period) {
  if (period < 1 || period > 4) throw ConfigError("distance weights exist for periods 1..4");
  static const std::vector<std::string> names = {
      "age",           "charlson",           "time_until_test", "time_until_hosp",           "time_positive_to_hosp",
      "cancer",        "respiratory_illness", "cardiopathy",     "heart_failure",             "interstitial_lung_disease",
      "liver_disease", "cystic_fibrosis",     "dementia"};
  static const double table[13][4] = {{1, 1, 2, 1}, {2, 1, 1, 3}, {2, 1, 1, 2}, {2, 1, 1, 1}, {5, 4, 8, 1},
                                      {1, 1, 8, 6}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1},
                                      {1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}};
  DistanceWeights w;
  w.covariates = names;
  for (const auto& row : table) w.weights.push_back(row[period - 1]);
  return w;
}

}  // namespace fairaudit
