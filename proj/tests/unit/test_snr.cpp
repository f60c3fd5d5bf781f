#include <doctest.h>

#include <cmath>

#include "emulab/error.hpp"
#include "emulab/phy/preamble.hpp"
#include "emulab/phy/snr.hpp"
#include "emulab/rng.hpp"

using namespace emulab;
using namespace emulab::phy;

namespace {

std::vector<cf32> received(std::span<const cf32> known, double snr_db, std::complex<double> gain, Rng& rng) {
  const double nv = std::norm(gain) * std::pow(10.0, -snr_db / 10.0);
  std::vector<cf32> rx(known.size());
  for (std::size_t i = 0; i < known.size(); ++i) {
    const auto z = gain * std::complex<double>(known[i]) + rng.complex_gaussian(nv);
    rx[i] = cf32(static_cast<float>(z.real()), static_cast<float>(z.imag()));
  }
  return rx;
}

}  // namespace

TEST_CASE("pooled estimate is unbiased over a probe burst") {
  const auto known = preamble_symbols();
  for (double snr : {0.0, 10.0, 20.0}) {
    CAPTURE(snr);
    Rng rng(static_cast<std::uint64_t>(snr) + 1);
    double mean = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
      SnrAccumulator acc;
      for (int f = 0; f < 20; ++f) acc.add(pilot_stats(received(known, snr, std::polar(0.3, 1.1 * f), rng), known));
      const auto r = acc.result();
      CHECK(r.n_symbols == 1280);
      mean += r.snr_db;
    }
    CHECK(std::abs(mean / trials - snr) < 0.3);
  }
}

TEST_CASE("estimate is invariant to gain and phase") {
  const auto known = preamble_symbols();
  Rng rng(5);
  const auto rx = received(known, 12.0, {1.0, 0.0}, rng);
  std::vector<cf32> scaled(rx.size());
  const auto g = std::polar(7.0F, -2.0F);
  for (std::size_t i = 0; i < rx.size(); ++i) scaled[i] = g * rx[i];
  const auto r1 = estimate_snr(rx, known);
  const auto r2 = estimate_snr(scaled, known);
  CHECK(r1.snr_db == doctest::Approx(r2.snr_db).epsilon(1e-4));
}

TEST_CASE("noiseless input hits the ceiling, errors on bad input") {
  const auto known = preamble_symbols();
  CHECK(estimate_snr(known, known).snr_db == kSnrCeilDb);
  std::vector<cf32> zeros(known.size());
  try {
    estimate_snr(zeros, known);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateInput);
  }
  CHECK_THROWS_AS(estimate_snr(known.subspan(0, 10), known), Error);
}

TEST_CASE("clamping") {
  CHECK(clamp_snr_db(-100.0) == kSnrFloorDb);
  CHECK(clamp_snr_db(100.0) == kSnrCeilDb);
  CHECK(clamp_snr_db(3.5) == 3.5);
}
