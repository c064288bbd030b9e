#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fairaudit/report.hpp"

using namespace fairaudit;

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(std::nan("")), "NA");
  EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(format_number(v)), v);
}

TEST(Hash, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Header, Layout) {
  OutputHeader h;
  h.config_hash = 0x1234;
  h.seed = 7;
  h.kind = "audit";
  std::ostringstream out;
  write_header(out, h);
  EXPECT_EQ(out.str(), "# fairaudit " + std::string(library_version()) +
                           "\n# kind: audit\n# config-hash: 0000000000001234\n# seed: 7\n");
}
