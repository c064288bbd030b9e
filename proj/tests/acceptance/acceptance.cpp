// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "commands.hpp"
#include "fairaudit/diagnostics.hpp"
#include "fairaudit/estimators.hpp"
#include "fairaudit/random.hpp"
#include "fairaudit/scenario.hpp"
#include "fairaudit/sensitivity.hpp"
#include "fairaudit/transport.hpp"
#include "lp_oracle.hpp"
#include "oracles.hpp"

using namespace fairaudit;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Result trimmed_ot_exactness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(1, 6), pick(0, 2);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  const double alphas[] = {0.0, 0.25, 0.5};
  double worst = 0.0;
  int bad = 0;
  for (int t = 0; t < 50; ++t) {
    const int n0 = size(rng), n1 = size(rng);
    const double a0 = alphas[pick(rng)], a1 = alphas[pick(rng)];
    CostMatrix cost;
    cost.rows = n0;
    cost.cols = n1;
    for (int i = 0; i < n0 * n1; ++i) cost.values.push_back(u(rng));
    const auto plan = solve_trimmed_transport(cost, {a0, a1});
    const auto lp = oracle::trimmed_transport_lp(cost.values, n0, n1, a0, a1);
    if (lp.status != oracle::LpStatus::optimal) {
      ++bad;
      continue;
    }
    worst = std::max(worst, std::abs(plan.objective - lp.objective));
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && worst <= 1e-8 && secs < 60,
          fmt("50 instances, max |solver - LP| = %.2e, %.2f s", worst, secs)};
}

Result w2_one_dimensional() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> size(1, 200);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-2.0, 2.0), scale(0.2, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int na = size(rng), nb = size(rng);
    const double s = shift(rng), c = scale(rng);
    Eigen::MatrixXd a(na, 1), b(nb, 1);
    std::vector<double> va(na), vb(nb);
    for (int i = 0; i < na; ++i) a(i, 0) = va[i] = g(rng);
    for (int i = 0; i < nb; ++i) b(i, 0) = vb[i] = s + c * g(rng);
    const std::vector<double> wa(na, 1.0 / na), wb(nb, 1.0 / nb);
    const double got = w2(a, wa, b, wb);
    const double want = oracle::w2_quantile_coupling(va, wa, vb, wb);
    worst = std::max(worst, std::abs(got - want));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 60, fmt("100 samples, max |w2 - quantile coupling| = %.2e, %.2f s", worst, secs)};
}

Result mmd_oracle_and_calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<int> size(5, 60), dim(1, 4);
  std::uniform_real_distribution<double> sig(0.05, 2.0), shift(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  auto draw = [&](int n, int d, double mu) {
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = mu + g(rng);
    return m;
  };
  auto rows = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> r(m.rows(), std::vector<double>(m.cols()));
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
    return r;
  };
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int d = dim(rng);
    const auto a = draw(size(rng), d, 0.0), b = draw(size(rng), d, shift(rng));
    const double s = sig(rng);
    worst = std::max(worst, std::abs(mmd2(a, b, s) - oracle::mmd2_direct(rows(a), rows(b), s)));
  }

  int rejections = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t) {
    const auto a = draw(50, 2, 0.0), b = draw(50, 2, 0.0);
    rejections += mmd_permutation_test(a, b, KernelSpec{}, 0.05, 200, 7000 + t).reject;
  }
  const double rate = static_cast<double>(rejections) / trials;
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && rate >= 0.02 && rate <= 0.09 && secs < 300,
          fmt("max |mmd2 - direct| = %.2e; false rejections %d/%d = %.3f; %.1f s", worst, rejections, trials, rate,
              secs)};
}

Result tv_analytic() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0.0, 1.0);
  CovariateSchema cs({{"x", CovariateKind::continuous}});
  std::vector<Observation> r0, r1;
  for (int i = 0; i < 20000; ++i) r0.push_back({0, 0, {g(rng)}});
  for (int i = 0; i < 20000; ++i) r1.push_back({0, 1, {2.0 + g(rng)}});
  const double tv = tv_marginal(uniform_sample(ObservationalDataset(cs, r0)),
                                uniform_sample(ObservationalDataset(cs, r1)), "x", CovariateKind::continuous);
  const double exact = std::erf(1.0 / std::sqrt(2.0));  // 2 Phi(1) - 1

  CovariateSchema bs({{"b", CovariateKind::binary}});
  std::bernoulli_distribution b0(0.3), b1(0.55);
  std::vector<Observation> q0, q1;
  for (int i = 0; i < 997; ++i) q0.push_back({0, 0, {b0(rng) ? 1.0 : 0.0}});
  for (int i = 0; i < 1203; ++i) q1.push_back({0, 1, {b1(rng) ? 1.0 : 0.0}});
  auto share = [](const std::vector<Observation>& q) {
    double ones = 0;
    for (const auto& o : q) ones += o.x[0];
    return ones / static_cast<double>(q.size());
  };
  const double want = std::abs(share(q0) - share(q1));
  const double got = tv_marginal(uniform_sample(ObservationalDataset(bs, q0)),
                                 uniform_sample(ObservationalDataset(bs, q1)), "b", CovariateKind::binary);
  return {std::abs(tv - exact) <= 0.02 && std::abs(got - want) <= 1e-12,
          fmt("Gaussian TV %.4f vs %.4f; binary |diff| = %.1e", tv, exact, std::abs(got - want))};
}

bool covers(const ConfidenceInterval& ci, double truth) {
  // A constant effect makes the adjusted interval a point; allow rounding.
  return ci.lo - 1e-12 <= truth && truth <= ci.hi + 1e-12;
}

Result estimator_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const double truth = 0.2;
  const auto spec = preset("confounded-shift", 10000, 505);
  const auto data = generate(spec);
  const auto nuis = evaluate_nuisance(data, oracle_propensity(spec), oracle_outcome(spec));
  const double adj = ate_adjusted(data, nuis).value;
  const double dr = ate_ipw_dr(data, nuis).value;
  const double ht = ate_ipw_ht(data, nuis.propensity).value;
  const double un = ate_unmatched(data).value;
  const bool point = std::abs(adj - truth) <= 0.03 && std::abs(dr - truth) <= 0.03 && std::abs(ht - truth) <= 0.03 &&
                     std::abs(un - truth) >= 0.05;

  int cover_adj = 0, cover_dr = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const auto s = preset("confounded-shift", 10000, 50000 + r);
    const auto d = generate(s);
    const auto nv = evaluate_nuisance(d, oracle_propensity(s), oracle_outcome(s));
    cover_adj += covers(ate_adjusted(d, nv).ci, truth);
    cover_dr += covers(ate_ipw_dr(d, nv).ci, truth);
  }
  const double ca = static_cast<double>(cover_adj) / reps, cd = static_cast<double>(cover_dr) / reps;
  const double secs = seconds_since(t0);
  return {point && ca >= 0.90 && cd >= 0.90 && secs < 600,
          fmt("adjusted %.4f, DR %.4f, HT %.4f, unmatched %.4f; coverage adjusted %.3f, DR %.3f; %.1f s", adj, dr, ht,
              un, ca, cd, secs)};
}

Result double_robustness() {
  const double truth = 0.2;
  const auto spec = preset("confounded-shift", 10000, 606);
  const auto data = generate(spec);
  const std::size_t p = data.schema().size();
  // Wrong direction and wrong covariate on purpose.
  const OutcomeModel bad_outcome(std::make_shared<FunctionPredictor>(
                                     p + 1, [](std::span<const double> zx) { return 0.5 - 0.3 * std::tanh(zx[2]); }),
                                 1e-6);
  const PropensityModel bad_propensity(std::make_shared<FunctionPredictor>(
                                           p, [](std::span<const double> x) { return 0.5 + 0.3 * std::tanh(x[1]); }),
                                       0.01);
  const double a = ate_ipw_dr(data, bad_outcome, oracle_propensity(spec)).value;
  const double b = ate_ipw_dr(data, oracle_outcome(spec), bad_propensity).value;
  return {std::abs(a - truth) <= 0.03 && std::abs(b - truth) <= 0.03,
          fmt("wrong outcome + true propensity %.4f; true outcome + wrong propensity %.4f", a, b)};
}

Result verdict_fixtures() {
  ConfidenceInterval strong{-0.39, -0.35};
  ConfidenceInterval weak{-0.03, 0.01};
  const auto v1 = fairness_verdict(strong), v2 = fairness_verdict(weak);
  return {v1 == Verdict::evidence_of_unfairness && v2 == Verdict::no_evidence,
          fmt("[-0.39, -0.35] -> %s; [-0.03, 0.01] -> %s", std::string(to_string(v1)).c_str(),
              std::string(to_string(v2)).c_str())};
}

Result balance_improvement() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<MatchVariant> variants{MatchVariant::euclidean, MatchVariant::euclidean2,
                                           MatchVariant::propensity, MatchVariant::propensity2};
  std::vector<int> ok(variants.size() + 1, 0);
  const int trials = 50;
  for (int t = 0; t < trials; ++t) {
    const auto data = generate(preset("confounded-shift", 3000, 8000 + t));
    const auto cov = data.schema().names();
    const auto norm = fit_normalization(data, cov);
    const auto prop = fit_propensity_with(data, LogisticConfig{}, 0.01);
    const auto s0 = uniform_group(data, 0), s1 = uniform_group(data, 1);
    const auto f0 = feature_matrix(s0, cov, &norm), f1 = feature_matrix(s1, cov, &norm);
    const double sigma = median_heuristic_sigma(f0, f1, t);
    const double w_orig = w2(s0, s1, cov, &norm), m_orig = mmd2(f0, f1, sigma);
    auto mmd_of = [&](const WeightedSample& a, const WeightedSample& b) {
      return mmd2(feature_matrix(a, cov, &norm), feature_matrix(b, cov, &norm), sigma);
    };
    for (std::size_t v = 0; v < variants.size(); ++v) {
      MatchConfig mc;
      mc.variant = variants[v];
      mc.trim = default_trim_levels(variants[v], OutcomeKind::hospitalisation_death, 1);
      mc.covariates = cov;
      mc.seed = t;
      const auto r = match_groups(data, mc, &norm, &prop);
      const double w = w2(r.control, r.treated, cov, &norm);
      const double m = mmd_of(support_sample(r.control), support_sample(r.treated));
      ok[v] += w < w_orig && m < m_orig;
    }
    const auto [i0, i1] = inverse_weighted_samples(data, prop.predict_all(data));
    const double w = w2(i0, i1, cov, &norm);
    const double m = mmd_of(systematic_resample(i0, i0.size(), derive_seed(t, 1)),
                            systematic_resample(i1, i1.size(), derive_seed(t, 2)));
    ok.back() += w < w_orig && m < m_orig;
  }
  bool pass = true;
  std::string detail;
  for (std::size_t v = 0; v <= variants.size(); ++v) {
    pass = pass && ok[v] >= 0.95 * trials;
    const std::string name = v < variants.size() ? std::string(to_string(variants[v])) : "InverseWeighting";
    detail += fmt("%s%s %d/%d", v ? ", " : "", name.c_str(), ok[v], trials);
  }
  return {pass, detail + fmt("; %.0f s", seconds_since(t0))};
}

Result sensitivity_identities() {
  auto spec = preset("hidden-confounder", 4000, 909);
  spec.emit_u = true;
  const auto full = generate(spec);
  const std::vector<std::string> u{"u"};
  const auto reduced = full.drop_covariates(u);
  const auto prop = fit_propensity_with(reduced, LogisticConfig{}, 0.01);
  const LatentDrawConfig draws{400, 17};

  const double b1 = bias_of({0.3, 0.7}, reduced, prop, draws);
  const double b2 = bias_of({0.3, 1.4}, reduced, prop, draws);
  const double ratio = b2 / b1;
  const bool linear = std::abs(ratio - 2.0) <= 1e-10;

  double round_trip = 0.0;
  for (double eta : {0.05, 0.2, 0.5, 0.9}) {
    const auto d = delta_required(eta, 0.05, reduced, prop, draws);
    round_trip = std::max(round_trip, d.unbounded ? 1.0 : std::abs(bias_of({eta, d.delta}, reduced, prop, draws) - 0.05));
  }

  double worst_z = 0.0;
  std::uint64_t seed = 0;
  for (double e : {0.05, 0.3, 0.5, 0.8, 0.97})
    for (double eta : {0.02, 0.3, 0.7, 0.95}) {
      const auto v = simulate_latent_propensity(e, eta, 20000, ++seed);
      double m = 0, s = 0;
      for (double x : v) m += x;
      m /= v.size();
      for (double x : v) s += (x - m) * (x - m);
      const double se = std::sqrt(s / (v.size() - 1) / v.size());
      worst_z = std::max(worst_z, std::abs(m - e) / se);
    }
  const bool mean = worst_z <= 3.0;

  std::vector<double> ratios;
  bool calibrated = true;
  for (int s = 1; s <= 5; ++s) {
    auto hs = preset("hidden-confounder", 10000, 900 + s);
    hs.emit_u = true;
    const auto f = generate(hs);
    const auto r = f.drop_covariates(u);
    const auto pf = fit_propensity_with(f, LogisticConfig{}, 0.01), pr = fit_propensity_with(r, LogisticConfig{}, 0.01);
    const auto of = fit_outcome_with(f, LogisticConfig{}, 1e-6), orr = fit_outcome_with(r, LogisticConfig{}, 1e-6);
    const double shift = std::abs(ate_ipw_dr(r, orr, pr).value - ate_ipw_dr(f, of, pf).value);
    std::vector<double> mf, mr;
    for (std::size_t i = 0; i < f.size(); ++i) {
      mf.push_back(of.predict(f.row(i).z, f.row(i).x));
      mr.push_back(orr.predict(r.row(i).z, r.row(i).x));
    }
    const auto params = calibrate_sensitivity(f, pf.predict_all(f), pr.predict_all(r), mf, mr);
    const double q = bias_of(params, r, pr) / shift;
    ratios.push_back(q);
    calibrated = calibrated && q >= 0.5 && q <= 2.0;
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  return {linear && round_trip <= 1e-6 && mean && calibrated,
          fmt("ratio %.12f; round trip %.1e; worst mean z %.2f; predicted/actual shift %.2f..%.2f", ratio, round_trip,
              worst_z, *lo, *hi)};
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), dir).string()] = s.str();
  }
  return files;
}

Result audit_determinism() {
  const fs::path dir = fs::temp_directory_path() / "fairaudit_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json config{
      {"input", {{"scenario", {{"preset", "confounded-shift"}, {"n", 2000}, {"seed", 3}}}}},
      {"ci", {{"bootstrap_replicates", 100}}},
      {"seed", 77}};
  std::ofstream(dir / "audit.json") << config.dump(2);
  std::vector<std::map<std::string, std::string>> outputs;
  std::ostringstream log, err;
  int status = 0;
  for (int jobs : {1, 1, 4}) {
    cli::RunOptions o;
    o.config = dir / "audit.json";
    o.out = dir / ("out" + std::to_string(outputs.size()));
    o.jobs = jobs;
    status |= cli::cmd_audit(o, log, err);
    outputs.push_back(read_tree(*o.out));
  }
  fs::remove_all(dir);
  const bool same = !outputs[0].empty() && outputs[0] == outputs[1] && outputs[0] == outputs[2];
  return {status == 0 && same, fmt("%zu files; exit %d; %s", outputs[0].size(), status,
                                   same ? "identical across runs and jobs 1/4" : "outputs differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
      {"trimmed OT exactness", trimmed_ot_exactness},
      {"1-D Wasserstein oracle", w2_one_dimensional},
      {"MMD oracle and calibration", mmd_oracle_and_calibration},
      {"TV analytic check", tv_analytic},
      {"estimator correctness", estimator_correctness},
      {"double robustness", double_robustness},
      {"verdict fixtures", verdict_fixtures},
      {"balance improvement", balance_improvement},
      {"sensitivity identities", sensitivity_identities},
      {"audit determinism", audit_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Result r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << (i + 1) << " " << criteria[i].first << ": " << r.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
