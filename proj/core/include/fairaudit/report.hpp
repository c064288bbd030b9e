#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace fairaudit {

std::string_view library_version();

/// Shortest round-trip decimal form; "NA" for NaN, "inf"/"-inf" otherwise.
std::string format_number(double v);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

struct OutputHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string version{library_version()};
  std::string kind;
};

/// Comment block written at the top of every output file:
///   # fairaudit <version>
///   # kind: <kind>
///   # config-hash: <16 hex digits>
///   # seed: <seed>
void write_header(std::ostream& out, const OutputHeader& header);

}  // namespace fairaudit
