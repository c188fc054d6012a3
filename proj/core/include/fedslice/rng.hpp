#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fedslice {

// All stochastic behavior flows through mt19937_64 streams. The engine's
// output sequence is fixed by the C++ standard, and the samplers below avoid
// std::*_distribution (whose algorithms are implementation-defined), so a
// given seed reproduces the same trajectory on any platform.
using RngStream = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

enum class StreamTag : std::uint32_t {
  Demand = 1,
  Channel = 2,
  AgentAction = 3,
  AgentReplay = 4,
  AgentInit = 5,
  EnvEpisode = 6,
  Eval = 7,
};

// Sub-seed derivation: master xor a mixed hash of the stream identity, so new
// cells/slices/tags never perturb existing streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint32_t cell_id,
                                 std::uint32_t slice_id, StreamTag tag,
                                 std::uint64_t salt = 0) {
  std::uint64_t h = splitmix64((std::uint64_t(cell_id) << 40) ^
                               (std::uint64_t(slice_id) << 20) ^
                               std::uint64_t(tag));
  h = splitmix64(h ^ splitmix64(salt));
  return master ^ h;
}

// Uniform double in [0, 1), 53 random bits.
inline double uniform_real(RngStream& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n), rejection sampled (unbiased).
inline int uniform_int(RngStream& rng, int n) {
  const std::uint64_t span = std::uint64_t(n);
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return int(x % span);
}

// Box-Muller; consumes exactly two draws per sample.
inline double normal(RngStream& rng, double mean, double stddev) {
  double u1;
  do {
    u1 = uniform_real(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform_real(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * M_PI * u2);
}

// Knuth's product method; fine for the small rates used here.
inline int poisson(RngStream& rng, double rate) {
  if (rate <= 0.0) return 0;
  const double threshold = std::exp(-rate);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform_real(rng);
  } while (p > threshold);
  return k - 1;
}

}  // namespace fedslice
