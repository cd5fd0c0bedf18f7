#pragma once

// Seed mixing and portable random number generation. Everything that samples
// in this library derives its stream from explicit 64-bit seeds through the
// functions below, so runs are reproducible bit-for-bit regardless of the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>

namespace magspo {

constexpr std::uint64_t kSeedGamma = 0x9e3779b97f4a7c15ULL;

// Finalizer from the splitmix64 generator (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += kSeedGamma;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Combines a seed with one more component. Chained left to right:
// mix_seed(mix_seed(master, case_id), rollout_index) etc.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t part) {
  return splitmix64(seed ^ (part + kSeedGamma + (seed << 6) + (seed >> 2)));
}

// Minimal counter-based generator; one instance per sampled object.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kSeedGamma;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). n must be >= 1.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_unit() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller on explicit uniforms.
  double next_normal() {
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace magspo
