#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fermi_hbt {

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Substream seed for (seed, stage, index). Stages keep the beam, response,
/// crosstalk and background draws of one block independent.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stage,
                                    std::uint64_t index) {
  return mix64(mix64(mix64(seed) ^ stage) ^ index);
}

namespace stage {
inline constexpr std::uint64_t beam = 0x62656d;
inline constexpr std::uint64_t response = 0x727370;
inline constexpr std::uint64_t crosstalk = 0x78746b;
inline constexpr std::uint64_t background = 0x62676b;
}  // namespace stage

/// mt19937_64 with distribution transforms written out explicitly, so that
/// streams are reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  double exponential(double mean) { return -mean * std::log(uniform_pos()); }

  /// Uniform integer in [0, n), Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t x = engine_();
    unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        x = engine_();
        m = static_cast<unsigned __int128>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fermi_hbt
