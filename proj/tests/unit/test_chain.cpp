#include <doctest.h>

#include <cmath>
#include <numbers>

#include "emulab/error.hpp"
#include "emulab/phy/chain.hpp"
#include "emulab/phy/preamble.hpp"
#include "emulab/rng.hpp"

using namespace emulab;
using namespace emulab::phy;

namespace {

const PulseParams kPulse{4, 0.35};

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = rng.byte();
  return out;
}

// Symbol SNR in dB -> per-sample noise variance for unit-power shaped samples.
IqBuffer impair(IqBuffer buf, double snr_db, double cfo_hz, std::size_t lead, std::uint64_t seed) {
  Rng rng(seed);
  const double nv = kPulse.sps * std::pow(10.0, -snr_db / 10.0);
  std::vector<cf32> out(lead, cf32{});
  out.insert(out.end(), buf.samples.begin(), buf.samples.end());
  out.resize(out.size() + 64, cf32{});
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto s = std::complex<double>(out[i]) * std::polar(1.0, 2.0 * std::numbers::pi * cfo_hz * double(i) / buf.sample_rate_hz);
    if (std::isfinite(snr_db)) s += rng.complex_gaussian(nv);
    out[i] = cf32(static_cast<float>(s.real()), static_cast<float>(s.imag()));
  }
  buf.samples = std::move(out);
  return buf;
}

}  // namespace

TEST_CASE("frame layout and size") {
  const auto table = scenario::default_mcs_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto frame = build_frame(random_bytes(100, i), table[i], i);
    CHECK(frame.size() == frame_symbol_count(100, table[i]));
  }
  // 8PSK-3/4 with 512 bytes: (4096 + 6) * 2 * 2/3 coded bits -> 5470 bits -> 1824 symbols.
  CHECK(payload_symbol_count(512, table[4]) == 1824);
  CHECK(payload_symbol_count(512, table[1]) == 4102);
}

TEST_CASE("noiseless loopback for every MCS and several lengths") {
  const auto table = scenario::default_mcs_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t len : {1u, 17u, 512u}) {
      const auto payload = random_bytes(len, len * 10 + i);
      const auto rx = rx_chain(tx_chain(payload, table[i], i, kPulse, 250e3), table, kPulse, {{}, 250e3});
      CHECK(rx.payload == payload);
      CHECK(rx.mcs_index == i);
      CHECK(rx.sync.offset == 0);
      CHECK(rx.snr.snr_db > 40.0);
    }
  }
}

TEST_CASE("decodes with delay, offset frequency and noise") {
  const auto table = scenario::default_mcs_table();
  const auto payload = random_bytes(512, 3);
  const double rs = 250e3;
  const auto tx = tx_chain(payload, table[2], 2, kPulse, rs);
  RxOptions opts{{}, rs};
  const auto rx = rx_chain(impair(tx, 15.0, 0.01 * rs, 4 * 23, 1), table, kPulse, opts);
  CHECK(rx.payload == payload);
  CHECK(rx.sync.offset == 23);
  CHECK(std::abs(rx.sync.cfo_hz - 0.01 * rs) < 0.001 * rs);
  CHECK(std::abs(rx.snr.snr_db - 15.0) < 1.5);
}

TEST_CASE("noise only raises NoFrameFound") {
  IqBuffer noise;
  noise.sample_rate_hz = 1e6;
  noise.samples.resize(4000);
  const auto buf = impair(noise, 0.0, 0.0, 0, 17);
  try {
    rx_chain(buf, scenario::default_mcs_table(), kPulse, {{}, 250e3});
    FAIL("expected NoFrameFound");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoFrameFound);
  }
}

TEST_CASE("probe measurement falls back to the nominal slot") {
  const auto table = scenario::default_mcs_table();
  const auto tx = tx_chain(random_bytes(16, 1), table[0], 0, kPulse, 250e3);
  const auto m = measure_probe(impair(tx, -12.0, 0.0, 0, 5), kPulse, {{}, 250e3});
  CHECK(m.pilots.n_symbols == kPreambleSymbols);
  const auto clean = measure_probe(tx, kPulse, {{}, 250e3});
  CHECK(clean.sync.found);
}

TEST_CASE("payload limits") {
  const auto table = scenario::default_mcs_table();
  CHECK_THROWS_AS(build_frame(random_bytes(513, 1), table[0], 0), Error);
  CHECK_THROWS_AS(build_frame(random_bytes(8, 1), table[0], 16), Error);
}
