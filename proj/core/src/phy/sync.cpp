#include "emulab/phy/sync.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <vector>

namespace emulab::phy {

namespace {

using cd = std::complex<double>;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// |sum_n z[n] e^{-j w n}|
double dtft_magnitude(std::span<const cd> z, double w) {
  const cd step = std::polar(1.0, -w);
  cd rot{1.0, 0.0};
  cd acc{};
  for (const auto& v : z) {
    acc += v * rot;
    rot *= step;
  }
  return std::abs(acc);
}

struct FreqPeak {
  double w = 0.0;
  double magnitude = 0.0;
};

// Grid search over [-w_max, w_max] with 8x oversampling of the DTFT, then
// golden-section refinement inside the winning grid cell.
FreqPeak search_frequency(std::span<const cd> z, double w_max) {
  const double n = static_cast<double>(z.size());
  const double step = kTwoPi / (8.0 * n);
  const int half = static_cast<int>(std::ceil(w_max / step));
  FreqPeak best{0.0, -1.0};
  for (int i = -half; i <= half; ++i) {
    const double w = std::clamp(i * step, -w_max, w_max);
    const double m = dtft_magnitude(z, w);
    if (m > best.magnitude) best = {w, m};
  }
  double lo = std::max(best.w - step, -w_max);
  double hi = std::min(best.w + step, w_max);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo);
  double x2 = lo + g * (hi - lo);
  double f1 = dtft_magnitude(z, x1);
  double f2 = dtft_magnitude(z, x2);
  for (int it = 0; it < 24; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = dtft_magnitude(z, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = dtft_magnitude(z, x1);
    }
  }
  const double w = 0.5 * (lo + hi);
  const double m = dtft_magnitude(z, w);
  if (m > best.magnitude) best = {w, m};
  return best;
}

}  // namespace

SyncResult frame_sync(std::span<const cf32> rx, std::span<const cf32> known, double symbol_rate_hz,
                      const SyncOptions& options) {
  SyncResult result;
  const std::size_t n = known.size();
  if (n < 2 || rx.size() < n) return result;
  const std::size_t positions = rx.size() - n + 1;

  double known_energy = 0.0;
  for (const auto& p : known) known_energy += std::norm(cd(p));

  // Differential products remove any constant phase rotation per symbol, so
  // the short-list is insensitive to carrier offset.
  std::vector<cd> dp(n - 1);
  for (std::size_t i = 1; i < n; ++i) dp[i - 1] = std::conj(cd(known[i]) * std::conj(cd(known[i - 1])));
  std::vector<cd> dr(rx.size() - 1);
  for (std::size_t i = 1; i < rx.size(); ++i) dr[i - 1] = cd(rx[i]) * std::conj(cd(rx[i - 1]));
  std::vector<double> energy_prefix(rx.size() + 1, 0.0);
  for (std::size_t i = 0; i < rx.size(); ++i) energy_prefix[i + 1] = energy_prefix[i] + std::norm(cd(rx[i]));

  std::vector<std::pair<double, std::size_t>> scores;
  scores.reserve(positions);
  for (std::size_t k = 0; k < positions; ++k) {
    const double e = energy_prefix[k + n] - energy_prefix[k];
    if (e <= 0.0) continue;
    cd acc{};
    for (std::size_t i = 0; i + 1 < n; ++i) acc += dr[k + i] * dp[i];
    scores.emplace_back(std::abs(acc) / e, k);
  }
  if (scores.empty()) return result;
  const std::size_t shortlist = std::min<std::size_t>(std::max(options.candidates, 1), scores.size());
  std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(shortlist), scores.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });

  const double w_max = kTwoPi * options.max_cfo_fraction;
  std::vector<cd> z(n);
  for (std::size_t c = 0; c < shortlist; ++c) {
    const std::size_t k = scores[c].second;
    for (std::size_t i = 0; i < n; ++i) z[i] = cd(rx[k + i]) * std::conj(cd(known[i]));
    const FreqPeak peak = search_frequency(z, w_max);
    const double e = energy_prefix[k + n] - energy_prefix[k];
    const double metric = peak.magnitude / std::sqrt(e * known_energy);
    if (metric > result.metric) {
      result.metric = metric;
      result.offset = k;
      result.cfo_hz = peak.w / kTwoPi * symbol_rate_hz;
    }
  }
  result.found = result.metric >= options.threshold;
  return result;
}

void derotate(std::span<cf32> rx, double cfo_hz, double symbol_rate_hz, std::size_t reference) {
  if (cfo_hz == 0.0) return;
  const double w = kTwoPi * cfo_hz / symbol_rate_hz;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double phase = -w * (static_cast<double>(i) - static_cast<double>(reference));
    rx[i] *= cf32(std::polar(1.0, phase));
  }
}

}  // namespace emulab::phy
