#pragma once

#include <span>

#include "emulab/phy/types.hpp"

namespace emulab::phy {

constexpr std::size_t kPreambleSymbols = 64;

// 128 bits from the x^7 + x^6 + 1 LFSR, register seeded all-ones.
std::span<const std::uint8_t> preamble_bits();

// The 128 bits QPSK-mapped to 64 unit-modulus symbols.
std::span<const cf32> preamble_symbols();

}  // namespace emulab::phy
