#pragma once

#include <cstdint>
#include <random>

namespace fairaudit {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent per-task seeds from a
/// master seed and a counter so results do not depend on scheduling.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) noexcept {
  return mix_seed(mix_seed(master) ^ (counter * 0xd1b54a32d192ed03ULL + 1));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t counter) {
  return Rng(derive_seed(master, counter));
}

}  // namespace fairaudit
