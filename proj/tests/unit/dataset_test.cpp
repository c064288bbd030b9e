#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fairaudit/dataset.hpp"
#include "fairaudit/errors.hpp"

using namespace fairaudit;

namespace {

CovariateSchema age_schema() { return CovariateSchema({{"age", CovariateKind::continuous}}); }

ObservationalDataset ages(std::vector<double> values) {
  std::vector<Observation> rows;
  for (std::size_t i = 0; i < values.size(); ++i) rows.push_back({static_cast<int>(i % 2), static_cast<int>((i / 2) % 2), {values[i]}});
  return ObservationalDataset(age_schema(), rows);
}

}  // namespace

TEST(Schema, RejectsDuplicateAndEmptyNames) {
  EXPECT_THROW(CovariateSchema({{"a", CovariateKind::binary}, {"a", CovariateKind::binary}}), DataError);
  EXPECT_THROW(CovariateSchema({{"", CovariateKind::binary}}), DataError);
  EXPECT_THROW(CovariateSchema(std::vector<Covariate>{}), DataError);
}

TEST(Schema, LookupAndSubset) {
  CovariateSchema s({{"a", CovariateKind::continuous}, {"b", CovariateKind::binary}, {"c", CovariateKind::continuous}});
  EXPECT_EQ(s.index_of("c"), 2u);
  EXPECT_FALSE(s.find("zz").has_value());
  EXPECT_THROW(s.index_of("zz"), DataError);
  std::vector<std::string> names{"c", "a"};
  const auto sub = s.subset(names);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub[0].name, "c");
}

TEST(LoadDataset, ParsesSingleRow) {
  std::istringstream in("y,z,age\n1,0,63\n");
  const auto d = load_dataset(in, age_schema());
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d.row(0).y, 1);
  EXPECT_EQ(d.row(0).z, 0);
  EXPECT_DOUBLE_EQ(d.row(0).x[0], 63.0);
}

TEST(LoadDataset, RejectsNonBinaryTreatment) {
  std::istringstream in("y,z,age\n1,2,63\n");
  try {
    load_dataset(in, age_schema());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("treatment not in {0,1}"), std::string::npos);
  }
}

TEST(LoadDataset, MissingColumnAndEmpty) {
  std::istringstream a("y,z\n1,0\n");
  EXPECT_THROW(load_dataset(a, age_schema()), DataError);
  std::istringstream b("y,z,age\n");
  EXPECT_THROW(load_dataset(b, age_schema()), DataError);
}

TEST(LoadDataset, DropPolicyMatchesLineScan) {
  const std::string text = "y,z,age\n1,0,63\n0,1,\n1,1,70\n0,0,81\n";
  std::istringstream in(text);
  LoadOptions opt;
  opt.missing = MissingPolicy::drop;
  const auto d = load_dataset(in, age_schema(), {}, opt);
  // line-by-line oracle: count data lines whose last field is nonempty
  std::istringstream scan(text);
  std::string line;
  std::getline(scan, line);
  std::size_t kept = 0;
  while (std::getline(scan, line))
    if (!line.empty() && line.back() != ',') ++kept;
  EXPECT_EQ(d.size(), kept);
  EXPECT_EQ(d.size(), 3u);
  std::istringstream strict(text);
  EXPECT_THROW(load_dataset(strict, age_schema()), DataError);
}

TEST(LoadDataset, ColumnMapAndComments) {
  std::istringstream in("# exported\n\"outcome\",treated,AGE\n1,1,\"61.5\"\n\n0,0,70\n");
  ColumnMap map;
  map.outcome = "outcome";
  map.treatment = "treated";
  map.covariates = {"AGE"};
  const auto d = load_dataset(in, age_schema(), map);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_DOUBLE_EQ(d.row(0).x[0], 61.5);
}

TEST(LoadDataset, RoundTrip) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  CovariateSchema s({{"a", CovariateKind::continuous}, {"b", CovariateKind::binary}});
  std::vector<Observation> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({i % 2, (i / 3) % 2, {g(rng) * 1e3, static_cast<double>(i % 2)}});
  ObservationalDataset d(s, rows);
  std::stringstream buf;
  save_dataset(buf, d);
  const auto back = load_dataset(buf, s);
  EXPECT_EQ(back.rows(), d.rows());
}

TEST(Dataset, GroupsAndFlip) {
  const auto d = ages({60, 61, 62, 63, 64, 65});
  EXPECT_EQ(d.treated_count() + d.control_count(), d.size());
  const auto f = d.with_flipped_treatment();
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(f.row(i).z, 1 - d.row(i).z);
  ObservationalDataset one_group(age_schema(), {{1, 1, {3.0}}});
  EXPECT_THROW(one_group.require_both_groups(), DataError);
}

TEST(FilterAge, StrictInequality) {
  const auto d = ages({59, 60, 70});
  const auto f = filter_age_over(d, 59);
  ASSERT_EQ(f.size(), 2u);
  EXPECT_DOUBLE_EQ(f.row(0).x[0], 60);
  EXPECT_DOUBLE_EQ(f.row(1).x[0], 70);
  EXPECT_EQ(filter_age_over(d, -1).rows(), d.rows());
}

TEST(FilterAge, CountingOracleAndIdempotence) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(20, 100);
  std::vector<double> v(100);
  for (auto& a : v) a = std::floor(u(rng));
  const auto d = ages(v);
  std::size_t count = 0;
  for (double a : v) count += a > 59 ? 1 : 0;
  const auto f = filter_age_over(d, 59);
  EXPECT_EQ(f.size(), count);
  EXPECT_EQ(filter_age_over(f, 59).rows(), f.rows());
}

TEST(Normalization, RangeScale) {
  const auto d = ages({60, 80, 100});
  std::vector<std::string> names{"age"};
  const auto n = fit_normalization(d, names);
  EXPECT_DOUBLE_EQ(*n.scale_of("age"), 40.0);
  const auto scaled = n.apply(d);
  EXPECT_DOUBLE_EQ(scaled.row(2).x[0] - scaled.row(0).x[0], 1.0);
}

TEST(Normalization, BinaryUnchangedAndConstantRejected) {
  CovariateSchema s({{"b", CovariateKind::binary}, {"k", CovariateKind::continuous}});
  ObservationalDataset d(s, {{0, 0, {0, 5}}, {1, 1, {1, 5}}});
  std::vector<std::string> b{"b"}, k{"k"};
  EXPECT_DOUBLE_EQ(*fit_normalization(d, b).scale_of("b"), 1.0);
  try {
    fit_normalization(d, k);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'k'"), std::string::npos);
  }
}

TEST(Normalization, ExhaustivePairCheck) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 10);
  CovariateSchema s({{"a", CovariateKind::continuous}, {"b", CovariateKind::continuous}});
  std::vector<Observation> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({0, i % 2, {g(rng), g(rng) * 3}});
  ObservationalDataset d(s, rows);
  const auto names = s.names();
  const auto scaled = fit_normalization(d, names).apply(d);
  for (std::size_t c = 0; c < 2; ++c) {
    double worst = 0;
    for (std::size_t i = 0; i < scaled.size(); ++i)
      for (std::size_t j = 0; j < scaled.size(); ++j)
        worst = std::max(worst, std::abs(scaled.row(i).x[c] - scaled.row(j).x[c]));
    EXPECT_GE(worst, 1 - 1e-12);
    EXPECT_LE(worst, 1.0 + 1e-15);
  }
}

TEST(SchemaDescriptor, RoundTrip) {
  CovariateSchema s({{"a", CovariateKind::continuous}, {"b", CovariateKind::binary}});
  EXPECT_EQ(schema_from_descriptor(schema_descriptor(s)), s);
}

TEST(Dates, ParseAndFormat) {
  const auto d = parse_date("2020-03-01");
  EXPECT_EQ(format_date(d), "2020-03-01");
  EXPECT_THROW(parse_date("2020-13-01"), DataError);
  EXPECT_THROW(parse_date("01/03/2020"), DataError);
  EXPECT_THROW(PeriodBounds(parse_date("2020-03-02"), parse_date("2020-03-01")), ConfigError);
}

TEST(TimeCovariates, Definitions) {
  const auto start = parse_date("2020-03-01");
  const PeriodBounds period(start, parse_date("2020-06-30"));
  auto day = [&](int k) { return start + std::chrono::days(k); };
  std::vector<DatedRecord> recs{{day(0), std::nullopt}, {day(3), day(8)}, {day(10), std::nullopt}};
  const auto t = derive_time_covariates(recs, period);
  EXPECT_DOUBLE_EQ(t[1].time_until_test, 3);
  EXPECT_DOUBLE_EQ(*t[1].time_until_hosp, 8);
  EXPECT_DOUBLE_EQ(*t[1].time_positive_to_hosp, 5);
  EXPECT_FALSE(t[0].time_until_hosp.has_value());
}

TEST(TimeCovariates, RecomputationOracleAndFlags) {
  const auto start = parse_date("2020-09-01");
  const PeriodBounds period(start, parse_date("2020-12-31"));
  auto day = [&](int k) { return start + std::chrono::days(k); };
  const int test_days[5] = {12, 5, 40, 7, 30};
  const int hosp_days[5] = {15, -1, 18, 7, 31};
  std::vector<DatedRecord> recs;
  for (int i = 0; i < 5; ++i)
    recs.push_back({day(test_days[i]), hosp_days[i] < 0 ? std::nullopt : std::optional<Date>(day(hosp_days[i]))});
  const auto t = derive_time_covariates(recs, period);
  const int first = 5;
  for (int i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(t[i].time_until_test, test_days[i] - first);
    if (hosp_days[i] >= 0) {
      EXPECT_DOUBLE_EQ(*t[i].time_until_hosp, hosp_days[i] - first);
      EXPECT_DOUBLE_EQ(*t[i].time_positive_to_hosp, *t[i].time_until_hosp - t[i].time_until_test);
    }
  }
  // hospitalised 22 days before the test: outside the 21-day window
  EXPECT_TRUE(t[2].flagged);
  EXPECT_FALSE(t[0].flagged);

  std::vector<DatedRecord> outside{{day(-1), std::nullopt}};
  EXPECT_THROW(derive_time_covariates(outside, period), DataError);
}
