#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using fairaudit::cli::RunOptions;
using nlohmann::json;

namespace {

class Workspace : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("fairaudit_cli_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_json(const std::string& name, const json& j) {
    std::ofstream(dir_ / name) << j.dump(2);
    return dir_ / name;
  }

  static json quick(json input) {
    return json{{"input", std::move(input)},
                {"models", {{"candidates", json::array({{{"family", "logistic"}}})}, {"folds", 2}}},
                {"ci", {{"bootstrap_replicates", 50}}},
                {"diagnose", {{"permutations", 100}}},
                {"sensitivity", {{"grid_size", 4}, {"draws", 100}, {"band_replicates", 0}}},
                {"seed", 5}};
  }

  static json scenario(const std::string& preset, int n, int seed = 1) {
    return json{{"scenario", {{"preset", preset}, {"n", n}, {"seed", seed}}}};
  }

  int run(int (*cmd)(const RunOptions&, std::ostream&, std::ostream&), const fs::path& config, const fs::path& out,
          int jobs = 1) {
    RunOptions o;
    o.config = config;
    o.out = out;
    o.jobs = jobs;
    log_.str("");
    err_.str("");
    return cmd(o, log_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  // Data lines of a CSV output, header comments removed, split on commas.
  static std::vector<std::vector<std::string>> rows(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      out.push_back(cells);
    }
    return out;
  }

  fs::path dir_;
  std::ostringstream log_, err_;
};

using Audit = Workspace;
using Diagnose = Workspace;
using Sensitivity = Workspace;
using Match = Workspace;
using Simulate = Workspace;

}  // namespace

TEST_F(Audit, ByteIdenticalAcrossRunsAndJobs) {
  const auto cfg = write_json("c.json", quick(scenario("confounded-shift", 500)));
  ASSERT_EQ(run(fairaudit::cli::cmd_audit, cfg, dir_ / "a"), 0) << err_.str();
  ASSERT_EQ(run(fairaudit::cli::cmd_audit, cfg, dir_ / "b"), 0);
  ASSERT_EQ(run(fairaudit::cli::cmd_audit, cfg, dir_ / "c", 3), 0);
  for (const auto* f : {"audit_estimates.csv", "audit_verdicts.csv", "audit_plot.csv", "audit_report.json"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "c" / f)) << f;
  }
  const auto text = slurp(dir_ / "a" / "audit_estimates.csv");
  EXPECT_EQ(text.rfind("# fairaudit ", 0), 0u);
  EXPECT_NE(text.find("# config-hash: "), std::string::npos);
  EXPECT_NE(text.find("# seed: 5"), std::string::npos);
}

TEST_F(Audit, RandomizedDataGivesNoEvidenceMajority) {
  const auto cfg = write_json("c.json", quick(scenario("null-randomized", 1500, 4)));
  ASSERT_EQ(run(fairaudit::cli::cmd_audit, cfg, dir_ / "out"), 0) << err_.str();
  const auto v = rows(dir_ / "out" / "audit_verdicts.csv");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1].back(), "no-evidence");
}

TEST_F(Audit, MissingInputNamesThePath) {
  auto j = quick("does_not_exist.csv");
  j["schema"] = {{"covariates", {"x1"}}};
  const auto cfg = write_json("c.json", j);
  EXPECT_EQ(run(fairaudit::cli::cmd_audit, cfg, dir_ / "out"), 2);
  EXPECT_NE(err_.str().find("does_not_exist.csv"), std::string::npos);
}

TEST_F(Audit, ConfigErrorsExitWithOne) {
  auto j = quick(scenario("confounded-shift", 100));
  j["estimatorz"] = json::array();
  EXPECT_EQ(run(fairaudit::cli::cmd_audit, write_json("c.json", j), dir_ / "out"), 1);
  EXPECT_NE(err_.str().find("estimatorz"), std::string::npos);
  j = quick(scenario("confounded-shift", 100));
  j["ci"]["bootstrap_replicates"] = 10;
  EXPECT_EQ(run(fairaudit::cli::cmd_audit, write_json("c.json", j), dir_ / "out"), 1);
}

TEST_F(Audit, MultiplePeriodsAndOutcomes) {
  auto j = quick(nullptr);
  j.erase("input");
  j["periods"] = {{{"name", "early"}, {"input", scenario("confounded-shift", 300, 1)}, {"trim_period", 1}},
                  {{"name", "late"}, {"input", scenario("confounded-shift", 300, 2)}, {"trim_period", 3}}};
  j["estimators"] = {"Unmatched", "MatchedEuc2", "InverseWeighting2"};
  ASSERT_EQ(run(fairaudit::cli::cmd_audit, write_json("c.json", j), dir_ / "out", 2), 0) << err_.str();
  const auto r = rows(dir_ / "out" / "audit_estimates.csv");
  ASSERT_EQ(r.size(), 1u + 2 * 3);
  EXPECT_EQ(r[1][1], "early");
  EXPECT_EQ(r[4][1], "late");
  const auto plot = rows(dir_ / "out" / "audit_plot.csv");
  EXPECT_EQ(plot.size(), 1u + 3);
}

TEST_F(Diagnose, MatchedSamplesAreCloser) {
  const auto cfg = write_json("c.json", quick(scenario("confounded-shift", 800)));
  ASSERT_EQ(run(fairaudit::cli::cmd_diagnose, cfg, dir_ / "out"), 0) << err_.str();
  const auto t = rows(dir_ / "out" / "diagnose_y_all_distances.csv");
  ASSERT_EQ(t[0], (std::vector<std::string>{"method", "MMD2", "W2"}));
  ASSERT_EQ(t.size(), 7u);
  const double original = std::stod(t[1][2]);
  for (std::size_t k = 2; k < t.size(); ++k) EXPECT_LT(std::stod(t[k][2]), original) << t[k][0];
  EXPECT_EQ(t.back()[0], "InverseWeighting");
  EXPECT_EQ(t.back()[1], "NA");
}

TEST_F(Diagnose, IdenticalGroupsAreAtDistanceZero) {
  std::ofstream data(dir_ / "d.csv");
  data << "y,z,a,b\n";
  for (int i = 0; i < 40; ++i)
    for (int z = 0; z < 2; ++z) data << (i % 3 == 0) << ',' << z << ',' << i * 0.5 << ',' << (i % 2) << '\n';
  data.close();
  auto j = quick("d.csv");
  j["schema"] = {{"covariates", {{{"name", "a"}}, {{"name", "b"}, {"kind", "binary"}}}}};
  j["match"] = {{"variants", {"MatchedEuc"}}};
  j["trim"] = {{"MatchedEuc", {0.0, 0.0}}};
  j["input"] = {{"input", "d.csv"}, {"trim_period", 0}};
  j["estimators"] = {"MatchedEuc"};
  ASSERT_EQ(run(fairaudit::cli::cmd_diagnose, write_json("c.json", j), dir_ / "out"), 0) << err_.str();
  const auto t = rows(dir_ / "out" / "diagnose_y_all_distances.csv");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (t[k][1] != "NA") EXPECT_NEAR(std::stod(t[k][1]), 0.0, 1e-12) << t[k][0];
    EXPECT_NEAR(std::stod(t[k][2]), 0.0, 1e-6) << t[k][0];
  }
}

TEST_F(Sensitivity, HiddenConfounderGivesFiniteFrontier) {
  auto j = quick(scenario("hidden-confounder", 800));
  ASSERT_EQ(run(fairaudit::cli::cmd_sensitivity, write_json("c.json", j), dir_ / "out"), 0) << err_.str();
  const auto text = slurp(dir_ / "out" / "sensitivity_y_all.csv");
  EXPECT_NE(text.find("[frontier]"), std::string::npos);
  EXPECT_EQ(text.find("[bands]"), std::string::npos);
  const auto curve = json::parse(slurp(dir_ / "out" / "sensitivity_y_all.json"))["curve"];
  ASSERT_EQ(curve["frontier"].size(), 4u);
  for (const auto& p : curve["frontier"]) EXPECT_TRUE(p["outcome_influence"].is_number());
}

TEST_F(Sensitivity, BandsOnlyWhenEnabled) {
  auto j = quick(scenario("hidden-confounder", 400));
  j["sensitivity"]["band_replicates"] = 50;
  j["sensitivity"]["band_draws"] = 20;
  j["sensitivity"]["target_bias"] = 0.05;
  ASSERT_EQ(run(fairaudit::cli::cmd_sensitivity, write_json("c.json", j), dir_ / "out"), 0) << err_.str();
  EXPECT_NE(slurp(dir_ / "out" / "sensitivity_y_all.csv").find("[bands]"), std::string::npos);
}

TEST_F(Sensitivity, InconclusiveEstimatesGiveEmptyCurve) {
  auto j = quick(scenario("null-randomized", 600, 2));
  j["estimators"] = {"Unmatched", "InverseWeighting2"};
  ASSERT_EQ(run(fairaudit::cli::cmd_sensitivity, write_json("c.json", j), dir_ / "out"), 0) << err_.str();
  const auto r = rows(dir_ / "out" / "sensitivity_y_all.csv");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0], (std::vector<std::string>{"curve", "empty"}));
}

TEST_F(Match, WeightsSumToOnePerFile) {
  const auto cfg = write_json("c.json", quick(scenario("confounded-shift", 400)));
  ASSERT_EQ(run(fairaudit::cli::cmd_match, cfg, dir_ / "out"), 0) << err_.str();
  int files = 0;
  for (const auto& entry : fs::directory_iterator(dir_ / "out")) {
    const auto r = rows(entry.path());
    ASSERT_EQ(r[0].back(), "weight");
    double total = 0.0;
    for (std::size_t k = 1; k < r.size(); ++k) total += std::stod(r[k].back());
    EXPECT_NEAR(total, 1.0, 1e-12) << entry.path();
    ++files;
  }
  EXPECT_EQ(files, 8);
}

TEST_F(Match, NoTrimGivesUniformWeights) {
  auto j = quick(scenario("confounded-shift", 300));
  j["input"] = {{"input", scenario("confounded-shift", 300)}, {"trim_period", 0}};
  j["trim"] = {{"MatchedEuc", {0.0, 0.0}}};
  j["estimators"] = {"MatchedEuc"};
  j["match"] = {{"variants", {"MatchedEuc"}}};
  ASSERT_EQ(run(fairaudit::cli::cmd_match, write_json("c.json", j), dir_ / "out"), 0) << err_.str();
  for (const auto* side : {"control", "treated"}) {
    const auto r = rows(dir_ / "out" / (std::string("match_y_all_MatchedEuc_") + side + ".csv"));
    const double expected = 1.0 / static_cast<double>(r.size() - 1);
    for (std::size_t k = 1; k < r.size(); ++k) EXPECT_NEAR(std::stod(r[k].back()), expected, 1e-12);
  }
}

TEST_F(Simulate, RoundTripThroughAuditForEveryPreset) {
  for (const auto* preset : {"null-randomized", "confounded-shift", "confounded-null", "hidden-confounder"}) {
    const auto spec = write_json("spec.json", json{{"preset", preset}, {"n", 300}, {"seed", 2}});
    RunOptions o;
    o.config = spec;
    o.out = dir_ / "data.csv";
    ASSERT_EQ(fairaudit::cli::cmd_simulate(o, log_, err_), 0) << err_.str();
    auto j = quick("data.csv");
    j["schema"] = "data.csv.schema.json";
    EXPECT_EQ(run(fairaudit::cli::cmd_audit, write_json("c.json", j), dir_ / "out"), 0) << preset << err_.str();
  }
}
