#pragma once

// Portable, splittable random numbers.
//
// The engine is SplitMix64 (Steele, Lea & Flood 2014). Its output depends
// only on the 64-bit seed, so every sequence below is identical across
// compilers and standard libraries, unlike the <random> distributions.
//
// Stream splitting: Rng::stream(root, a, b, ...) hashes the root seed and a
// path of tags into an independent child seed. Samplers derive one stream per
// (batch_index, draw_index); label generators one stream per cluster index.

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace kgacc {

// Finalizer of SplitMix64; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  template <typename... Tags>
  static Rng stream(std::uint64_t root, Tags... tags) noexcept {
    return Rng(derive(root, {static_cast<std::uint64_t>(tags)...}));
  }

  static std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> tags) noexcept {
    std::uint64_t h = mix64(root ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t t : tags) h = mix64(h ^ mix64(t + 0x9e3779b97f4a7c15ULL));
    return h;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  // Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on the open interval (0, 1); safe for log() and pow(u, 1/w).
  double uniform_open() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  // Uniform integer in [0, bound), bound > 0. Lemire's multiply-and-reject.
  std::uint64_t below(std::uint64_t bound) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Standard normal via Box-Muller (the second variate is discarded so the
  // stream position stays a pure function of the number of calls).
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  // Exp(1).
  double exponential() noexcept;

 private:
  std::uint64_t state_;
};

}  // namespace kgacc
