#pragma once

#include <cstdint>
#include <optional>

#include "emulab/scenario.hpp"

namespace emulab::phy {

struct BerPoint {
  double ebn0_db = 0.0;
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;

  double ber() const noexcept { return bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0; }
};

// Monte-Carlo BER over a symbol-spaced AWGN channel: modulate, add noise at
// the requested Eb/N0 (per information bit), soft-demap and, when `rate` is
// set, Viterbi-decode. Info bits are processed in codewords of block_bits.
// Throws BadParams when info_bits is zero.
BerPoint simulate_ber(scenario::Modulation mod, std::optional<scenario::CodeRate> rate, double ebn0_db,
                      std::uint64_t info_bits, std::uint64_t seed, std::size_t block_bits = 4096);

}  // namespace emulab::phy
