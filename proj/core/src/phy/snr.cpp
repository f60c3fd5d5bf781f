#include "emulab/phy/snr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emulab/error.hpp"

namespace emulab::phy {

namespace {

using cd = std::complex<double>;

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

double to_db(double signal, double noise) {
  if (noise <= 0.0) return kSnrCeilDb;
  if (signal <= 0.0) return kSnrFloorDb;
  return clamp_snr_db(10.0 * std::log10(signal / noise));
}

}  // namespace

double clamp_snr_db(double snr_db) noexcept { return std::clamp(snr_db, kSnrFloorDb, kSnrCeilDb); }

PilotStats pilot_stats(std::span<const cf32> rx, std::span<const cf32> known) {
  if (rx.size() != known.size())
    throw Error(Errc::LengthMismatch, std::to_string(rx.size()), "rx and known pilot blocks differ in length");
  if (rx.size() < kMinSnrSymbols) throw Error(Errc::BadParams, std::to_string(rx.size()), "need at least 32 pilots");
  const std::size_t n = rx.size();
  double rx_energy = 0.0;
  double known_energy = 0.0;
  cd corr{};
  for (std::size_t i = 0; i < n; ++i) {
    corr += cd(rx[i]) * std::conj(cd(known[i]));
    rx_energy += std::norm(cd(rx[i]));
    known_energy += std::norm(cd(known[i]));
  }
  if (rx_energy == 0.0) throw Error(Errc::DegenerateInput, "rx", "all-zero pilot block");
  PilotStats s;
  s.n_symbols = n;
  s.amplitude = corr / known_energy;
  double residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) residual += std::norm(cd(rx[i]) - s.amplitude * cd(known[i]));
  // One complex degree of freedom is spent on the amplitude.
  s.noise_power = residual / static_cast<double>(n - 1);
  // E|a_hat|^2 = |a|^2 + N / n for unit-modulus pilots.
  s.signal_power = std::max(std::norm(s.amplitude) - s.noise_power / static_cast<double>(n), 0.0);
  return s;
}

SnrEstimate estimate_snr(std::span<const cf32> rx, std::span<const cf32> known) {
  const PilotStats s = pilot_stats(rx, known);
  SnrEstimate e;
  e.n_symbols = s.n_symbols;
  e.snr_db = to_db(s.signal_power, s.noise_power);
  // Large-sample spread: var(rho_hat)/rho^2 ~ (1 + 2/rho) / n.
  const double rho = std::pow(10.0, e.snr_db / 10.0);
  e.variance_db = kDbPerNeper * kDbPerNeper * (1.0 + 2.0 / rho) / static_cast<double>(s.n_symbols);
  return e;
}

void SnrAccumulator::add(const PilotStats& stats) {
  signal_sum_ += stats.signal_power;
  noise_sum_ += stats.noise_power;
  symbols_ += stats.n_symbols;
  per_frame_db_.push_back(to_db(stats.signal_power, stats.noise_power));
}

SnrEstimate SnrAccumulator::result() const {
  SnrEstimate e;
  e.n_symbols = symbols_;
  if (per_frame_db_.empty()) return e;
  e.snr_db = to_db(signal_sum_, noise_sum_);
  const double n = static_cast<double>(per_frame_db_.size());
  if (per_frame_db_.size() > 1) {
    double mean = 0.0;
    for (double v : per_frame_db_) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : per_frame_db_) var += (v - mean) * (v - mean);
    e.variance_db = var / (n - 1.0) / n;
  }
  return e;
}

}  // namespace emulab::phy
