#include <doctest.h>

#include <cmath>
#include <numbers>

#include "emulab/error.hpp"
#include "emulab/phy/modem.hpp"
#include "emulab/phy/preamble.hpp"
#include "emulab/phy/pulse.hpp"
#include "emulab/rng.hpp"

using namespace emulab;
using namespace emulab::phy;

namespace {

// Root-raised-cosine impulse response, t in symbol periods.
double rrc(double t, double beta) {
  const double pi = std::numbers::pi;
  if (std::abs(t) < 1e-12) return 1.0 - beta + 4.0 * beta / pi;
  if (std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
    return beta / std::sqrt(2.0) *
           ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
  }
  return (std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta))) /
         (pi * t * (1.0 - std::pow(4.0 * beta * t, 2)));
}

std::vector<double> convolve(const std::vector<float>& a, const std::vector<float>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += double(a[i]) * b[j];
  return out;
}

}  // namespace

TEST_CASE("prototype follows the closed-form RRC shape with unit energy") {
  for (double beta : {0.2, 0.35, 0.5}) {
    const int sps = 4;
    const auto p = rrc_prototype(sps, beta);
    REQUIRE(p.size() == static_cast<std::size_t>(kRrcSpanSymbols * sps + 1));
    double e = 0.0;
    for (float x : p) e += double(x) * x;
    CHECK(e == doctest::Approx(1.0).epsilon(1e-5));
    const std::size_t mid = p.size() / 2;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double t = (double(k) - double(mid)) / sps;
      CHECK(p[k] / p[mid] == doctest::Approx(rrc(t, beta) / rrc(0.0, beta)).epsilon(1e-4));
    }
  }
}

TEST_CASE("modem taps cascade to a Nyquist pulse") {
  for (int sps : {2, 4, 8}) {
    const auto t = rrc_taps(sps, 0.35);
    const auto c = convolve(t, t);
    const std::size_t mid = c.size() / 2;
    CHECK(c[mid] == doctest::Approx(1.0).epsilon(1e-3));
    // Truncation to the filter span leaves a small residual ISI.
    double isi = 0.0;
    for (std::size_t k = sps; mid + k < c.size(); k += sps) isi += c[mid + k] * c[mid + k] + c[mid - k] * c[mid - k];
    CAPTURE(sps);
    CHECK(isi < 1e-3);
  }
}

TEST_CASE("shaped unit-power symbols give unit sample power") {
  Rng rng(4);
  Bits bits(2 * 4000);
  for (auto& b : bits) b = rng.bit();
  const auto syms = modulate(bits, Modulation::QPSK);
  const auto buf = pulse_shape(syms, {4, 0.35}, 250e3);
  CHECK(buf.sample_rate_hz == doctest::Approx(1e6));
  CHECK(buf.samples.size() == syms.size() * 4 + shaping_taps({4, 0.35}).size() - 1);
  double p = 0.0;
  for (std::size_t i = 200; i + 200 < buf.samples.size(); ++i) p += std::norm(buf.samples[i]);
  CHECK(p / (buf.samples.size() - 400) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("matched filter recovers symbols without ISI") {
  Rng rng(6);
  Bits bits(3 * 500);
  for (auto& b : bits) b = rng.bit();
  const auto syms = modulate(bits, Modulation::PSK8);
  const auto rx = matched_filter(pulse_shape(syms, {4, 0.35}), {4, 0.35});
  REQUIRE(rx.size() >= syms.size());
  double err = 0.0;
  for (std::size_t i = 0; i < syms.size(); ++i) err += std::norm(rx[i] - syms[i]);
  CHECK(err / syms.size() < 1e-8);
}

TEST_CASE("bad pulse parameters") {
  const std::vector<cf32> s(4);
  CHECK_THROWS_AS(pulse_shape(s, {1, 0.35}), Error);
  CHECK_THROWS_AS(pulse_shape(s, {4, 0.0}), Error);
  CHECK_THROWS_AS(pulse_shape(s, {4, 1.5}), Error);
}

TEST_CASE("preamble is a maximal-length sequence with low sidelobes") {
  const auto bits = preamble_bits();
  REQUIRE(bits.size() == 128);
  int ones = 0;
  for (std::size_t i = 0; i < 127; ++i) ones += bits[i];
  CHECK(ones == 64);
  CHECK(bits[127] == bits[0]);  // period 127

  const auto p = preamble_symbols();
  REQUIRE(p.size() == kPreambleSymbols);
  for (auto s : p) CHECK(std::abs(s) == doctest::Approx(1.0));
  for (std::size_t lag = 1; lag < 32; ++lag) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i + lag < p.size(); ++i) acc += std::complex<double>(p[i + lag]) * std::conj(std::complex<double>(p[i]));
    CHECK(std::abs(acc) / 64.0 < 0.3);
  }
}
