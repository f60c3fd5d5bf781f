#pragma once

#include <span>

#include "emulab/phy/types.hpp"

namespace emulab::phy {

struct SyncOptions {
  double threshold = 0.6;
  // Frequency search range as a fraction of the symbol rate.
  double max_cfo_fraction = 0.25;
  // Offsets short-listed by the CFO-insensitive differential correlator
  // before the frequency-searched coherent metric is evaluated.
  int candidates = 8;
};

struct SyncResult {
  std::size_t offset = 0;
  double cfo_hz = 0.0;
  bool found = false;
  double metric = 0.0;  // normalized cross-correlation at the chosen offset
};

// Locates `known` inside `rx` (symbol-rate samples). The metric is the
// normalized cross-correlation |sum r p*| / sqrt(E_r E_p), maximised over
// carrier offsets within +-max_cfo_fraction * symbol_rate. The CFO estimate
// is the maximiser of that search.
SyncResult frame_sync(std::span<const cf32> rx, std::span<const cf32> known, double symbol_rate_hz = 1.0,
                      const SyncOptions& options = {});

// Multiplies rx[n] by exp(-j 2 pi cfo (n - reference) / symbol_rate).
void derotate(std::span<cf32> rx, double cfo_hz, double symbol_rate_hz, std::size_t reference);

}  // namespace emulab::phy
