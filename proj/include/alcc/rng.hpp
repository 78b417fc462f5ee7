#ifndef ALCC_RNG_HPP
#define ALCC_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace alcc {

// Named sub-stream tags. Every stochastic component draws from an engine
// seeded by derive_seed(root, {tag, index...}), so results do not depend on
// evaluation order or worker count.
namespace stream {
inline constexpr std::uint64_t driver = 0x1;
inline constexpr std::uint64_t env = 0x2;
inline constexpr std::uint64_t action = 0x3;
inline constexpr std::uint64_t buffer = 0x4;
inline constexpr std::uint64_t init = 0x5;
inline constexpr std::uint64_t ga = 0x6;
inline constexpr std::uint64_t profile = 0x7;
inline constexpr std::uint64_t population = 0x8;
inline constexpr std::uint64_t eval = 0x9;
inline constexpr std::uint64_t corpus = 0xa;
}  // namespace stream

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(root);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
  return s;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(std::mt19937_64& rng, double mean = 0.0,
                     double stddev = 1.0) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

}  // namespace alcc

#endif
