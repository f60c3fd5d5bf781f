#include "emulab/phy/preamble.hpp"

#include <array>

#include "emulab/phy/modem.hpp"

namespace emulab::phy {

namespace {

// Fibonacci LFSR for x^7 + x^6 + 1: the new bit is the XOR of register
// positions 7 and 6 (bits 6 and 5), shifted in at the bottom.
std::array<std::uint8_t, 2 * kPreambleSymbols> make_bits() {
  std::array<std::uint8_t, 2 * kPreambleSymbols> bits{};
  unsigned reg = 0x7F;
  for (auto& b : bits) {
    const unsigned fb = ((reg >> 6) ^ (reg >> 5)) & 1U;
    reg = ((reg << 1) | fb) & 0x7FU;
    b = static_cast<std::uint8_t>(fb);
  }
  return bits;
}

}  // namespace

std::span<const std::uint8_t> preamble_bits() {
  static const auto bits = make_bits();
  return bits;
}

std::span<const cf32> preamble_symbols() {
  static const std::vector<cf32> symbols = modulate(preamble_bits(), scenario::Modulation::QPSK);
  return symbols;
}

}  // namespace emulab::phy
