#pragma once

// Seeded randomness with a fixed algorithm so that outputs are identical
// across standard library implementations. std::uniform_int_distribution
// is implementation-defined, so bounded draws are done here.

#include <cstdint>
#include <random>
#include <string_view>

namespace wata::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Derives an independent stream seed from a base seed and a key.
inline std::uint64_t derive(std::uint64_t seed, std::string_view key) {
  return splitmix64(splitmix64(seed) ^ fnv1a(key));
}

/// Uniform integer in [0, bound) by rejection; bound must be positive.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
  std::uint64_t x;
  do {
    x = eng();
  } while (x > limit);
  return x % bound;
}

/// Uniform real in [0, 1) with 53 bits of precision.
inline double uniform_unit(Engine& eng) { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

}  // namespace wata::rng
