#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace samselect {

// FNV-1a, used to fold string identifiers into stream seeds.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream per (seed, patch, purpose).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::string_view patch_id,
                                    std::string_view purpose) {
  return splitmix64(splitmix64(seed ^ fnv1a(patch_id)) ^ fnv1a(purpose));
}

// mt19937_64 output is fully specified by the standard; the helpers below
// avoid the implementation-defined std distributions so streams reproduce
// across standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Rejection sampling for an unbiased draw in [0, n).
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace samselect
