#include "commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <new>
#include <sstream>

#include "config.hpp"
#include "fairaudit/battery.hpp"
#include "fairaudit/diagnostics.hpp"
#include "fairaudit/errors.hpp"
#include "fairaudit/parallel.hpp"
#include "fairaudit/random.hpp"
#include "fairaudit/report.hpp"
#include "fairaudit/scenario.hpp"
#include "fairaudit/sensitivity.hpp"

namespace fairaudit::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

template <class F>
decltype(auto) in_stage(const std::string& stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), stage + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const fs::filesystem_error& e) {
    throw DataError(stage + ": " + e.what());
  }
}

template <class F>
int run_guarded(std::string_view command, std::ostream& err, F&& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    err << "fairaudit " << command << ": " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::bad_alloc&) {
    err << "fairaudit " << command << ": out of memory\n";
  } catch (const std::exception& e) {
    err << "fairaudit " << command << ": " << e.what() << "\n";
  }
  return static_cast<int>(ErrorKind::estimation);
}

AuditConfig resolve(const RunOptions& options) {
  auto config = in_stage("config", [&] { return load_audit_config(options.config); });
  if (options.seed) config.seed = *options.seed;
  if (options.out) config.output_dir = *options.out;
  if (options.jobs) config.jobs = *options.jobs;
  if (config.jobs < 1) throw ConfigError("config: jobs must be at least 1");
  return config;
}

std::string safe_name(std::string_view s) {
  std::string out(s);
  for (auto& ch : out)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '.')) ch = '_';
  return out;
}

struct Cell {
  const OutcomeSpec* outcome = nullptr;
  const PeriodSpec* period = nullptr;
  ObservationalDataset data;
  std::uint64_t seed = 0;

  std::string label() const { return outcome->name + "/" + period->name; }
  std::string file_stem() const { return safe_name(outcome->name) + "_" + safe_name(period->name); }
};

ObservationalDataset load_period(const AuditConfig& config, const PeriodSpec& period, const OutcomeSpec& outcome) {
  ObservationalDataset data;
  if (period.scenario) {
    data = generate(*period.scenario);
  } else {
    if (!config.schema) throw ConfigError("a schema is required for file inputs");
    std::ifstream in(period.input);
    if (!in) throw DataError("cannot open " + period.input.string());
    ColumnMap columns;
    columns.outcome = outcome.column;
    columns.treatment = config.treatment_column;
    for (const auto& c : config.schema->entries()) {
      const auto it = config.covariate_columns.find(c.name);
      columns.covariates.push_back(it == config.covariate_columns.end() ? c.name : it->second);
    }
    try {
      data = load_dataset(in, *config.schema, columns, config.load);
    } catch (const DataError& e) {
      throw DataError(period.input.string() + ": " + e.what());
    }
  }
  if (config.age_over) data = filter_age_over(data, *config.age_over, config.age_covariate);
  if (!config.battery.covariates.empty()) data = data.select_covariates(config.battery.covariates);
  return data.with_period(period.name);
}

std::vector<Cell> load_cells(const AuditConfig& config) {
  std::vector<Cell> cells;
  for (const auto& p : config.periods)
    for (const auto& o : config.outcomes) {
      Cell c;
      c.outcome = &o;
      c.period = &p;
      c.seed = derive_seed(config.seed, fnv1a64(o.name + '\x1f' + p.name));
      c.data = in_stage("loading " + c.label(), [&] { return load_period(config, p, o); });
      cells.push_back(std::move(c));
    }
  return cells;
}

BatteryConfig cell_battery(const AuditConfig& config, const Cell& cell, int jobs) {
  BatteryConfig b = config.battery;
  b.period = cell.period->trim_period;
  b.outcome_kind = cell.outcome->kind;
  b.seed = cell.seed;
  b.nuisance.seed = cell.seed;
  b.jobs = jobs;
  if (config.weight_preset == WeightPreset::in_hospital) {
    b.distance_weights = {};
    if (cell.outcome->kind == OutcomeKind::death_in_hospital) {
      if (b.period < 1) throw ConfigError("in_hospital distance weights need trim_period 1..4");
      b.distance_weights = in_hospital_distance_weights(b.period);
    }
  }
  return b;
}

// Splits the thread budget between concurrent cells and the work inside each.
std::pair<int, int> split_jobs(int jobs, std::size_t cells) {
  const int outer = static_cast<int>(std::min<std::size_t>(std::max<std::size_t>(cells, 1), jobs));
  return {outer, std::max(1, jobs / outer)};
}

OutputHeader header_for(const AuditConfig& config, std::string kind) {
  OutputHeader h;
  h.config_hash = config_hash(config);
  h.seed = config.seed;
  h.kind = std::move(kind);
  return h;
}

json header_json(const OutputHeader& h) {
  return json{{"version", h.version}, {"kind", h.kind}, {"config_hash", hex64(h.config_hash)}, {"seed", h.seed}};
}

fs::path prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

// Writes atomically enough for our purposes: build in memory, then dump.
void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << contents;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string with_header(const OutputHeader& h, const std::string& body) {
  std::ostringstream out;
  write_header(out, h);
  out << body;
  return out.str();
}

struct EuclideanSetup {
  std::vector<std::string> covariates;
  std::vector<double> weights;
  std::optional<NormalizationSpec> normalization;
  std::vector<std::string> warnings;
};

bool is_constant_column(const ObservationalDataset& data, std::size_t k) {
  const auto v = data.column(k);
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return v.empty() || *lo == *hi;
}

EuclideanSetup euclidean_setup(const ObservationalDataset& data, const DistanceWeights& dw) {
  EuclideanSetup s;
  const auto names = dw.covariates.empty() ? data.schema().names() : dw.covariates;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const auto idx = data.schema().find(names[k]);
    if (!idx) throw ConfigError("distance weight covariate '" + names[k] + "' is not in the dataset");
    if (is_constant_column(data, *idx)) {
      s.warnings.push_back("covariate '" + names[k] + "' is constant and left out");
      continue;
    }
    s.covariates.push_back(names[k]);
    s.weights.push_back(dw.covariates.empty() ? 1.0 : dw.weights[k]);
  }
  if (!s.covariates.empty()) s.normalization = fit_normalization(data, s.covariates);
  return s;
}

MatchResult run_match(const ObservationalDataset& data, const BatteryConfig& b, MatchVariant variant,
                      const EuclideanSetup& euc, const PropensityModel* propensity, std::uint64_t seed) {
  MatchConfig mc;
  mc.variant = variant;
  mc.trim = b.trim_for(variant);
  mc.covariates = euc.covariates;
  mc.weights = euc.weights;
  mc.max_per_side = b.max_per_side;
  mc.seed = seed;
  mc.solver = b.solver;
  const bool euclidean = variant == MatchVariant::euclidean || variant == MatchVariant::euclidean2;
  if (euclidean && euc.covariates.empty()) throw DataError("no non-constant covariates to match on");
  return match_groups(data, mc, euc.normalization ? &*euc.normalization : nullptr, propensity);
}

// ---------------------------------------------------------------------------

void audit(const RunOptions& options, std::ostream& log) {
  const auto config = resolve(options);
  const auto cells = load_cells(config);
  const auto [outer, inner] = split_jobs(config.jobs, cells.size());
  std::vector<BatteryReport> reports(cells.size());
  parallel_for(cells.size(), outer, [&](std::size_t i) {
    const auto& cell = cells[i];
    reports[i] = in_stage("battery " + cell.label(), [&] { return run_battery(cell.data, cell_battery(config, cell, inner)); });
    reports[i].outcome = cell.outcome->name;
    reports[i].period = cell.period->name;
  });

  const auto dir = prepare_output_dir(config.output_dir);
  const auto header = header_for(config, "audit");
  std::ostringstream records, verdicts, plot;
  write_battery_records(records, reports);
  write_battery_plot_table(plot, reports);
  verdicts << "outcome,period,evidence,total,fraction,threshold,majority\n";
  json all = json::array();
  for (const auto& r : reports) {
    const auto& s = r.summary;
    verdicts << r.outcome << ',' << r.period << ',' << s.evidence << ',' << s.total << ',' << format_number(s.fraction)
             << ',' << format_number(s.threshold) << ',' << to_string(s.majority) << '\n';
    all.push_back(to_json(r));
    log << r.outcome << " / " << r.period << ": " << to_string(s.majority) << " (" << s.evidence << " of " << s.total
        << " estimators show evidence)\n";
    if (!r.warnings.empty()) log << "  " << r.warnings.size() << " warning(s), see audit_report.json\n";
  }
  in_stage("writing output", [&] {
    write_file(dir / "audit_estimates.csv", with_header(header, records.str()));
    write_file(dir / "audit_verdicts.csv", with_header(header, verdicts.str()));
    write_file(dir / "audit_plot.csv", with_header(header, plot.str()));
    write_file(dir / "audit_report.json", json{{"header", header_json(header)}, {"reports", all}}.dump(2) + "\n");
  });
}

// ---------------------------------------------------------------------------

struct MethodSamples {
  std::string method;
  WeightedSample control;
  WeightedSample treated;
  bool mmd_defined = true;
};

WeightedSample capped(const WeightedSample& s, std::size_t cap, std::uint64_t seed, bool* capped_flag) {
  if (s.size() <= cap) return s;
  *capped_flag = true;
  return systematic_resample(s, cap, seed);
}

struct DiagnoseCell {
  std::vector<std::string> methods;
  std::vector<BalanceReport> reports;
  double sigma = 0.0;
  std::vector<std::string> warnings;
};

DiagnoseCell diagnose_cell(const AuditConfig& config, const Cell& cell, int jobs) {
  const auto b = cell_battery(config, cell, jobs);
  const auto& data = cell.data;
  data.require_both_groups();
  DiagnoseCell out;
  auto euc = euclidean_setup(data, b.distance_weights);
  out.warnings = euc.warnings;
  if (euc.covariates.empty()) throw DataError("every covariate is constant");

  // Distances use every non-constant covariate on the range scale.
  const auto all = euclidean_setup(data, {});
  const auto& covariates = all.covariates;
  const auto& norm = *all.normalization;

  auto nuisance = b.nuisance;
  nuisance.seed = cell.seed;
  const auto propensity = fit_propensity(data, nuisance).model;

  std::vector<MethodSamples> methods;
  methods.push_back({"Original", uniform_group(data, 0), uniform_group(data, 1), true});
  for (std::size_t v = 0; v < config.match_variants.size(); ++v) {
    const auto variant = config.match_variants[v];
    auto m = run_match(data, b, variant, euc, &propensity, derive_seed(cell.seed, 200 + v));
    // MMD ignores weights: it is taken over the rows the matching kept.
    methods.push_back({std::string(to_string(variant)), std::move(m.control), std::move(m.treated), true});
  }
  {
    auto [c, t] = inverse_weighted_samples(data, propensity.predict_all(data));
    methods.push_back({"InverseWeighting", std::move(c), std::move(t), false});
  }

  const auto cap = config.diagnose.max_rows;
  bool was_capped = false;
  if (config.diagnose.sigma) {
    out.sigma = *config.diagnose.sigma;
  } else {
    const auto a = capped(methods[0].control, cap, derive_seed(cell.seed, 1), &was_capped);
    const auto t = capped(methods[0].treated, cap, derive_seed(cell.seed, 2), &was_capped);
    out.sigma = median_heuristic_sigma(feature_matrix(a, covariates, &norm), feature_matrix(t, covariates, &norm),
                                       cell.seed);
  }

  out.reports.resize(methods.size());
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const auto& m = methods[k];
    auto& r = out.reports[k];
    out.methods.push_back(m.method);
    for (std::size_t c = 0; c < data.schema().size(); ++c) {
      const auto& cov = data.schema()[c];
      r.tv.emplace_back(cov.name, tv_marginal(m.control, m.treated, cov.name, cov.kind, &r.warnings));
    }
    const auto base = derive_seed(cell.seed, 1000 + 10 * k);
    {
      const auto a = capped(m.control, cap, base + 1, &was_capped);
      const auto t = capped(m.treated, cap, base + 2, &was_capped);
      r.w2 = w2(a, t, covariates, &norm);
    }
    if (m.mmd_defined) {
      const auto a = capped(support_sample(m.control), cap, base + 3, &was_capped);
      const auto t = capped(support_sample(m.treated), cap, base + 4, &was_capped);
      const auto fa = feature_matrix(a, covariates, &norm), ft = feature_matrix(t, covariates, &norm);
      r.mmd2 = mmd2(fa, ft, out.sigma);
      if (config.diagnose.permutations > 0)
        r.mmd_test = mmd_permutation_test(fa, ft, KernelSpec{out.sigma}, config.diagnose.level,
                                          config.diagnose.permutations, base + 5, jobs);
    }
    r.propensity_curves = propensity_density_compare(m.control, m.treated, propensity, config.diagnose.grid_size);
  }
  if (was_capped)
    out.warnings.push_back("samples above " + std::to_string(cap) + " rows were resampled for MMD and W2");
  return out;
}

void diagnose(const RunOptions& options, std::ostream& log) {
  const auto config = resolve(options);
  const auto cells = load_cells(config);
  const auto [outer, inner] = split_jobs(config.jobs, cells.size());
  std::vector<DiagnoseCell> results(cells.size());
  parallel_for(cells.size(), outer, [&](std::size_t i) {
    results[i] = in_stage("diagnostics " + cells[i].label(), [&] { return diagnose_cell(config, cells[i], inner); });
  });

  const auto dir = prepare_output_dir(config.output_dir);
  const auto header = header_for(config, "diagnose");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& res = results[i];
    std::ostringstream distances, tv, curves;
    distances << "method,MMD2,W2\n";
    tv << "method,covariate,tv\n";
    curves << "method,grid,density0,density1\n";
    json methods = json::array();
    for (std::size_t k = 0; k < res.methods.size(); ++k) {
      const auto& r = res.reports[k];
      distances << res.methods[k] << ',' << (r.mmd2 ? format_number(*r.mmd2) : "NA") << ',' << format_number(r.w2)
                << '\n';
      for (const auto& [name, value] : r.tv) tv << res.methods[k] << ',' << name << ',' << format_number(value) << '\n';
      const auto& pc = *r.propensity_curves;
      for (std::size_t g = 0; g < pc.grid.size(); ++g)
        curves << res.methods[k] << ',' << format_number(pc.grid[g]) << ',' << format_number(pc.density0[g]) << ','
               << format_number(pc.density1[g]) << '\n';
      auto j = to_json(r);
      j.erase("propensity_curves");
      j["method"] = res.methods[k];
      methods.push_back(std::move(j));
    }
    const auto stem = "diagnose_" + cells[i].file_stem();
    in_stage("writing output", [&] {
      write_file(dir / (stem + "_distances.csv"), with_header(header, distances.str()));
      write_file(dir / (stem + "_tv.csv"), with_header(header, tv.str()));
      write_file(dir / (stem + "_propensity.csv"), with_header(header, curves.str()));
      write_file(dir / (stem + ".json"),
                 json{{"header", header_json(header)},
                      {"outcome", cells[i].outcome->name},
                      {"period", cells[i].period->name},
                      {"sigma", res.sigma},
                      {"methods", methods},
                      {"warnings", res.warnings}}
                         .dump(2) +
                     "\n");
    });
    log << cells[i].label() << ": W2 " << format_number(res.reports.front().w2) << " before adjustment\n";
  }
}

// ---------------------------------------------------------------------------

AustenCurve sensitivity_cell(const AuditConfig& config, const Cell& cell, int jobs) {
  const auto& s = config.sensitivity;
  const auto b = cell_battery(config, cell, jobs);
  std::vector<AteEstimate> estimates;
  if (!s.target_bias) estimates = run_battery(cell.data, b).estimates;
  const auto propensity = fit_propensity_with(cell.data, s.propensity_family, b.nuisance.propensity_clip);
  const auto outcome = fit_outcome_with(cell.data, s.outcome_family, b.nuisance.outcome_clip);

  AustenConfig ac;
  ac.grid_size = s.grid_size;
  ac.eta_min = s.eta_min;
  ac.eta_max = s.eta_max;
  ac.draws = {s.draws, derive_seed(cell.seed, 300)};
  ac.groups = s.groups;
  if (ac.groups.empty())
    for (const auto& name : cell.data.schema().names()) ac.groups.push_back({name, {name}});
  ac.band_replicates = s.band_replicates;
  ac.band_level = s.band_level;
  ac.band_draws = s.band_draws;
  ac.propensity_family = s.propensity_family;
  ac.outcome_family = s.outcome_family;
  ac.propensity_clip = b.nuisance.propensity_clip;
  ac.outcome_clip = b.nuisance.outcome_clip;
  ac.folds = b.nuisance.folds;
  ac.seed = cell.seed;
  ac.jobs = jobs;
  ac.target_bias = s.target_bias;
  return austen_curve(cell.data, estimates, propensity, outcome, ac);
}

void sensitivity(const RunOptions& options, std::ostream& log) {
  const auto config = resolve(options);
  const auto cells = load_cells(config);
  const auto [outer, inner] = split_jobs(config.jobs, cells.size());
  std::vector<AustenCurve> curves(cells.size());
  parallel_for(cells.size(), outer, [&](std::size_t i) {
    curves[i] = in_stage("sensitivity " + cells[i].label(), [&] { return sensitivity_cell(config, cells[i], inner); });
  });

  const auto dir = prepare_output_dir(config.output_dir);
  const auto header = header_for(config, "sensitivity");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::ostringstream csv;
    write_austen_curve(csv, curves[i]);
    const auto stem = "sensitivity_" + cells[i].file_stem();
    in_stage("writing output", [&] {
      write_file(dir / (stem + ".csv"), with_header(header, csv.str()));
      write_file(dir / (stem + ".json"), json{{"header", header_json(header)},
                                              {"outcome", cells[i].outcome->name},
                                              {"period", cells[i].period->name},
                                              {"curve", to_json(curves[i])}}
                                                 .dump(2) +
                                             "\n");
    });
    if (curves[i].vacuous)
      log << cells[i].label() << ": estimates already inconclusive, empty curve\n";
    else
      log << cells[i].label() << ": target bias " << format_number(curves[i].target_bias) << ", "
          << curves[i].frontier.size() << " frontier points\n";
  }
}

// ---------------------------------------------------------------------------

std::vector<MatchResult> match_cell(const AuditConfig& config, const Cell& cell) {
  const auto b = cell_battery(config, cell, 1);
  cell.data.require_both_groups();
  const auto euc = euclidean_setup(cell.data, b.distance_weights);
  auto nuisance = b.nuisance;
  nuisance.seed = cell.seed;
  const bool need_prop = std::any_of(config.match_variants.begin(), config.match_variants.end(), [](MatchVariant v) {
    return v == MatchVariant::propensity || v == MatchVariant::propensity2;
  });
  std::optional<PropensityModel> propensity;
  if (need_prop) propensity = fit_propensity(cell.data, nuisance).model;
  std::vector<MatchResult> out;
  for (std::size_t v = 0; v < config.match_variants.size(); ++v)
    out.push_back(run_match(cell.data, b, config.match_variants[v], euc, propensity ? &*propensity : nullptr,
                            derive_seed(cell.seed, 200 + v)));
  return out;
}

void match(const RunOptions& options, std::ostream& log) {
  const auto config = resolve(options);
  const auto cells = load_cells(config);
  std::vector<std::vector<MatchResult>> results(cells.size());
  parallel_for(cells.size(), config.jobs, [&](std::size_t i) {
    results[i] = in_stage("matching " + cells[i].label(), [&] { return match_cell(config, cells[i]); });
  });

  const auto dir = prepare_output_dir(config.output_dir);
  const auto header = header_for(config, "match");
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t v = 0; v < config.match_variants.size(); ++v) {
      const auto& r = results[i][v];
      const auto stem = "match_" + cells[i].file_stem() + "_" + std::string(to_string(config.match_variants[v]));
      std::ostringstream control, treated;
      save_weighted_sample(control, r.control);
      save_weighted_sample(treated, r.treated);
      in_stage("writing output", [&] {
        write_file(dir / (stem + "_control.csv"), with_header(header, control.str()));
        write_file(dir / (stem + "_treated.csv"), with_header(header, treated.str()));
      });
      log << cells[i].label() << " " << to_string(config.match_variants[v]) << ": effective sizes "
          << format_number(r.control.effective_size()) << " / " << format_number(r.treated.effective_size())
          << ", cost " << format_number(r.plan.objective) << "\n";
    }
}

// ---------------------------------------------------------------------------

void simulate(const RunOptions& options, std::ostream& log) {
  auto spec = in_stage("config", [&] { return scenario_from_json(read_json_file(options.config)); });
  if (options.seed) spec.seed = *options.seed;
  if (!options.out) throw ConfigError("simulate needs --out <file>");
  const auto data = in_stage("simulation", [&] { return generate(spec); });
  OutputHeader header;
  header.config_hash = fnv1a64(to_json(spec).dump());
  header.seed = spec.seed;
  header.kind = "simulate";
  std::ostringstream body;
  save_dataset(body, data);
  const fs::path out = *options.out;
  if (out.has_parent_path()) prepare_output_dir(out.parent_path());
  in_stage("writing output", [&] {
    write_file(out, with_header(header, body.str()));
    write_file(fs::path(out.string() + ".schema.json"), schema_descriptor(data.schema()).dump(2) + "\n");
  });
  const auto truth = true_ate(spec);
  log << "wrote " << data.size() << " rows to " << out.string() << "; true ATE " << format_number(truth.value)
      << (truth.analytic ? "" : " (Monte-Carlo)") << "\n";
}

}  // namespace

int cmd_audit(const RunOptions& options, std::ostream& log, std::ostream& err) {
  return run_guarded("audit", err, [&] { audit(options, log); });
}

int cmd_diagnose(const RunOptions& options, std::ostream& log, std::ostream& err) {
  return run_guarded("diagnose", err, [&] { diagnose(options, log); });
}

int cmd_sensitivity(const RunOptions& options, std::ostream& log, std::ostream& err) {
  return run_guarded("sensitivity", err, [&] { sensitivity(options, log); });
}

int cmd_match(const RunOptions& options, std::ostream& log, std::ostream& err) {
  return run_guarded("match", err, [&] { match(options, log); });
}

int cmd_simulate(const RunOptions& options, std::ostream& log, std::ostream& err) {
  return run_guarded("simulate", err, [&] { simulate(options, log); });
}

}  // namespace fairaudit::cli
