#include <algorithm>
#include <charconv>
#include <cstdio>

#include "fairaudit/dataset.hpp"
#include "fairaudit/errors.hpp"

namespace fairaudit {

namespace {

int parse_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw DataError("invalid ISO-8601 date '" + std::string(whole) + "'");
  return v;
}

}  // namespace

Date parse_date(std::string_view text) {
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw DataError("invalid ISO-8601 date '" + std::string(text) + "'");
  const int y = parse_int(text.substr(0, 4), text);
  const int m = parse_int(text.substr(5, 2), text);
  const int d = parse_int(text.substr(8, 2), text);
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
  return Date{ymd};
}

std::string format_date(Date date) {
  const std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

PeriodBounds::PeriodBounds(Date s, Date e) : start(s), end(e) {
  if (end < start)
    throw ConfigError("period start " + format_date(start) + " is after end " + format_date(end));
}

std::vector<TimeCovariates> derive_time_covariates(std::span<const DatedRecord> records,
                                                   const PeriodBounds& period,
                                                   int pre_positive_window_days) {
  std::vector<TimeCovariates> out;
  if (records.empty()) return out;
  for (const auto& r : records)
    if (!period.contains(r.test))
      throw DataError("test date " + format_date(r.test) + " outside period " +
                      format_date(period.start) + ".." + format_date(period.end));

  const Date first = std::min_element(records.begin(), records.end(), [](auto& a, auto& b) {
                       return a.test < b.test;
                     })->test;
  out.reserve(records.size());
  for (const auto& r : records) {
    TimeCovariates t;
    t.time_until_test = static_cast<double>((r.test - first).count());
    if (r.hospitalisation) {
      const auto hosp = static_cast<double>((*r.hospitalisation - first).count());
      t.time_until_hosp = hosp;
      t.time_positive_to_hosp = hosp - t.time_until_test;
      t.flagged = *t.time_positive_to_hosp < -static_cast<double>(pre_positive_window_days);
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace fairaudit
