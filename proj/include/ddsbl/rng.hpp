#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace ddsbl {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive well-separated seeds from small integers.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for trial t of a run with the given base seed: base XOR f(t).
constexpr std::uint64_t trial_seed(std::uint64_t base, std::uint64_t trial) {
  return base ^ mix_seed(trial);
}

// Independent sub-stream of a trial (channel, noise, data, ...).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix_seed(seed ^ mix_seed(salt + 0x5bd1e995ULL));
}

// Circularly-symmetric complex Gaussian with E|x|^2 = variance.
inline std::complex<double> complex_normal(Rng& rng, double variance) {
  std::normal_distribution<double> dist(0.0, std::sqrt(variance / 2.0));
  const double re = dist(rng);
  const double im = dist(rng);
  return {re, im};
}

}  // namespace ddsbl
