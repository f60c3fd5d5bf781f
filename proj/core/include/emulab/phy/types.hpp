#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace emulab::phy {

using cf32 = std::complex<float>;

// Complex baseband sample block. center_freq_hz is metadata only.
struct IqBuffer {
  std::vector<cf32> samples;
  double sample_rate_hz = 1.0;
  double center_freq_hz = 0.0;
};

// Unpacked bit vector, one 0/1 value per element.
using Bits = std::vector<std::uint8_t>;

Bits bytes_to_bits(std::span<const std::uint8_t> bytes);  // MSB first
std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits);

constexpr std::size_t kMaxPayloadBits = 4096;

}  // namespace emulab::phy
