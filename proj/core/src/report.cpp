#include "fairaudit/report.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#ifndef FAIRAUDIT_VERSION
#define FAIRAUDIT_VERSION "0.0.0"
#endif

namespace fairaudit {

std::string_view library_version() { return FAIRAUDIT_VERSION; }

std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

void write_header(std::ostream& out, const OutputHeader& header) {
  out << "# fairaudit " << header.version << '\n';
  if (!header.kind.empty()) out << "# kind: " << header.kind << '\n';
  out << "# config-hash: " << hex64(header.config_hash) << '\n';
  out << "# seed: " << header.seed << '\n';
}

}  // namespace fairaudit
