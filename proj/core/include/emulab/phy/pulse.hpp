#pragma once

#include <span>
#include <vector>

#include "emulab/phy/types.hpp"

namespace emulab::phy {

constexpr int kRrcSpanSymbols = 8;

struct PulseParams {
  int sps = 4;
  double rolloff = 0.35;
};

// Textbook root-raised-cosine sampled at span * sps + 1 points, unit energy.
// sps may be fractional (used for band-limiting noise to arbitrary widths).
std::vector<float> rrc_prototype(double sps, double rolloff, int span = kRrcSpanSymbols);

// Pulse-shaping taps used by the modem: the prototype projected onto the
// nearest tap set whose self-convolution is exactly Nyquist (zero ISI at
// multiples of sps), which removes the truncation ISI of a short span. The
// projection is kept only when it stays close to the prototype; otherwise
// the prototype is returned unchanged. Unit energy.
std::vector<float> rrc_taps(int sps, double rolloff, int span = kRrcSpanSymbols);

// Transmit shaping taps: rrc_taps scaled by sqrt(sps) so that unit-power
// symbols produce unit average sample power.
std::vector<float> shaping_taps(const PulseParams& p);

// Upsample by sps and filter. Output length n * sps + taps - 1.
// Throws BadParams for sps < 2 or rolloff outside (0, 1].
IqBuffer pulse_shape(std::span<const cf32> symbols, const PulseParams& p, double symbol_rate_hz = 1.0);

// Matched filter (rrc_taps / sqrt(sps), unity cascade gain at symbol centres)
// decimated to one sample per symbol. Output index k is the symbol that
// started at input sample k * sps.
std::vector<cf32> matched_filter(const IqBuffer& buffer, const PulseParams& p);

// Generic complex FIR, "same"-aligned full convolution (length n + taps - 1).
std::vector<cf32> fir_filter(std::span<const cf32> input, std::span<const float> taps);

}  // namespace emulab::phy
