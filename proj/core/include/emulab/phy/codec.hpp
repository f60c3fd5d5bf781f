#pragma once

#include <span>

#include "emulab/phy/types.hpp"
#include "emulab/scenario.hpp"

// K=7 convolutional code (generators 133/171 octal) with puncturing to 2/3
// and 3/4, plus a soft-input Viterbi decoder. The trellis is terminated with
// six zero tail bits.
namespace emulab::phy {

using scenario::CodeRate;

constexpr int kConstraintLength = 7;
constexpr int kTailBits = kConstraintLength - 1;
constexpr unsigned kGeneratorA = 0133;
constexpr unsigned kGeneratorB = 0171;

bool is_supported_rate(CodeRate rate) noexcept;

// Number of transmitted coded bits for n_info_bits after tail and puncturing.
std::size_t coded_length(std::size_t n_info_bits, CodeRate rate);

// Throws UnsupportedRate or PayloadTooLong (> kMaxPayloadBits).
Bits encode(std::span<const std::uint8_t> bits, CodeRate rate);

// llrs follow the log(P(0)/P(1)) convention: positive favours bit 0.
// Throws LengthMismatch when the length matches no whole codeword.
Bits viterbi_decode(std::span<const float> llrs, CodeRate rate);

}  // namespace emulab::phy
