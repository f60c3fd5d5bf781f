#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace emulab {

// Counter-based stream derivation: every random draw in the emulator comes
// from an engine seeded by (scenario seed, stream name, counter). There is no
// global generator state.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t counter) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream, std::uint64_t counter)
      : engine_(derive_seed(seed, stream, counter)) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double gaussian() { return normal_(engine_); }
  // Circular complex Gaussian with E|z|^2 = variance.
  std::complex<double> complex_gaussian(double variance);
  std::uint8_t bit() { return static_cast<std::uint8_t>(engine_() & 1U); }
  std::uint8_t byte() { return static_cast<std::uint8_t>(engine_() & 0xFFU); }
  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace emulab
