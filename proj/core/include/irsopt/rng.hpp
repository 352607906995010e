#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace irsopt {

// Deterministic random stream: xoshiro256++ seeded through splitmix64.
// We avoid <random> distributions on purpose: their output sequences are
// implementation-defined, and experiment CSVs must be bit-reproducible
// from a seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  // Independent substream for a labelled piece of work (trial index,
  // module name hash, ...). Deriving with the same salt twice gives the
  // same stream.
  RngStream derive(std::uint64_t salt) const {
    std::uint64_t mix = state_[0] ^ (salt * 0x9e3779b97f4a7c15ULL);
    mix ^= state_[2] + 0x6a09e667f3bcc909ULL;
    return RngStream(mix);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; one spare value is cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Circularly symmetric complex normal CN(0,1): Re, Im ~ N(0, 1/2).
  std::complex<double> cgaussian() {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    const double re = gaussian() * kInvSqrt2;
    const double im = gaussian() * kInvSqrt2;
    return {re, im};
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t rotl(std::uint64_t v, int k) {
    return (v << k) | (v >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace irsopt
