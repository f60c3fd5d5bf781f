#pragma once

#include <span>
#include <vector>

#include "emulab/phy/types.hpp"
#include "emulab/scenario.hpp"

namespace emulab::phy {

using scenario::Modulation;

// Gray-mapped, unit average power. Index i holds the point for the bit label
// whose MSB-first integer value is i.
std::span<const cf32> constellation(Modulation m);

std::vector<cf32> modulate(std::span<const std::uint8_t> bits, Modulation m);

// Per-bit LLRs, log(P(0)/P(1)). noise_var is the complex noise variance
// E|n|^2 per symbol. BPSK and QPSK are exact; 8PSK uses max-log.
std::vector<float> demodulate_soft(std::span<const cf32> symbols, Modulation m, double noise_var);

Bits hard_decision(std::span<const float> llrs);

}  // namespace emulab::phy
