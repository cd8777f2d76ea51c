#pragma once

#include <cstdint>
#include <random>

namespace s2l {

// std::mt19937_64 output is fixed by the standard; the std distributions are
// not, so bounded draws go through these helpers to keep seeded output
// identical across standard libraries.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

// Uniform integer in [0, bound), bound > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  while (true) {
    std::uint64_t x = rng();
    if (x < limit) return x % bound;
  }
}

inline unsigned __int128 uniform_below(Rng& rng, unsigned __int128 bound) {
  if (bound <= ~std::uint64_t{0}) return uniform_below(rng, static_cast<std::uint64_t>(bound));
  const unsigned __int128 max = ~static_cast<unsigned __int128>(0);
  const unsigned __int128 limit = max - (max % bound);
  while (true) {
    unsigned __int128 x = (static_cast<unsigned __int128>(rng()) << 64) | rng();
    if (x < limit) return x % bound;
  }
}

// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace s2l
