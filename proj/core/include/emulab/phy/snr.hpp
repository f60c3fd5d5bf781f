#pragma once

#include <complex>
#include <span>
#include <vector>

#include "emulab/phy/types.hpp"

namespace emulab::phy {

constexpr double kSnrFloorDb = -20.0;
constexpr double kSnrCeilDb = 60.0;
constexpr std::size_t kMinSnrSymbols = 32;

struct SnrEstimate {
  double snr_db = kSnrFloorDb;
  std::size_t n_symbols = 0;
  double variance_db = 0.0;  // dB^2
};

// Raw data-aided statistics of one pilot block.
struct PilotStats {
  std::complex<double> amplitude;  // correlation of rx with the known symbols
  double signal_power = 0.0;       // |amplitude|^2 less its noise bias
  double noise_power = 0.0;        // residual power, unbiased
  std::size_t n_symbols = 0;
};

PilotStats pilot_stats(std::span<const cf32> rx, std::span<const cf32> known);

// snr_db = 10 log10(S / N) from pilot_stats, clamped to [-20, 60].
// Throws DegenerateInput for an all-zero rx, LengthMismatch when sizes differ.
SnrEstimate estimate_snr(std::span<const cf32> rx, std::span<const cf32> known);

// Averages per-frame signal and noise power estimates over a probe burst.
class SnrAccumulator {
 public:
  void add(const PilotStats& stats);
  std::size_t frames() const noexcept { return per_frame_db_.size(); }
  SnrEstimate result() const;

 private:
  double signal_sum_ = 0.0;
  double noise_sum_ = 0.0;
  std::size_t symbols_ = 0;
  std::vector<double> per_frame_db_;
};

double clamp_snr_db(double snr_db) noexcept;

}  // namespace emulab::phy
