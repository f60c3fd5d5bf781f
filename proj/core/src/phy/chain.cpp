#include "emulab/phy/chain.hpp"

#include <cmath>
#include <numbers>

#include "emulab/error.hpp"
#include "emulab/phy/codec.hpp"
#include "emulab/phy/modem.hpp"
#include "emulab/phy/preamble.hpp"

namespace emulab::phy {

Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
  Bits bits;
  bits.reserve(bytes.size() * 8);
  for (auto byte : bytes)
    for (int b = 7; b >= 0; --b) bits.push_back(static_cast<std::uint8_t>((byte >> b) & 1U));
  return bits;
}

std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> bytes((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i] & 1U) bytes[i / 8] |= static_cast<std::uint8_t>(0x80U >> (i % 8));
  return bytes;
}

std::size_t payload_symbol_count(std::size_t payload_bytes, const scenario::McsProfile& mcs) {
  const std::size_t coded = coded_length(payload_bytes * 8, mcs.code_rate);
  const auto bps = static_cast<std::size_t>(scenario::bits_per_symbol(mcs.modulation));
  return (coded + bps - 1) / bps;
}

std::size_t frame_symbol_count(std::size_t payload_bytes, const scenario::McsProfile& mcs) {
  return kPreambleSymbols + kHeaderSymbols + payload_symbol_count(payload_bytes, mcs);
}

std::vector<cf32> build_frame(std::span<const std::uint8_t> payload, const scenario::McsProfile& mcs,
                              std::size_t mcs_index) {
  if (payload.size() > kMaxPayloadBytes)
    throw Error(Errc::PayloadTooLong, std::to_string(payload.size() * 8), "at most 4096 payload bits");
  if (mcs_index > 15) throw Error(Errc::BadParams, "mcs_index", "4-bit header field");

  const auto pre = preamble_symbols();
  std::vector<cf32> frame(pre.begin(), pre.end());

  const unsigned header = (static_cast<unsigned>(mcs_index) << 12) | static_cast<unsigned>(payload.size());
  Bits header_bits(kHeaderBits);
  for (std::size_t i = 0; i < kHeaderBits; ++i) header_bits[i] = (header >> (kHeaderBits - 1 - i)) & 1U;
  const auto header_syms = modulate(header_bits, scenario::Modulation::BPSK);
  for (std::size_t r = 0; r < kHeaderRepeats; ++r) frame.insert(frame.end(), header_syms.begin(), header_syms.end());

  Bits coded = encode(bytes_to_bits(payload), mcs.code_rate);
  const auto bps = static_cast<std::size_t>(scenario::bits_per_symbol(mcs.modulation));
  coded.resize(((coded.size() + bps - 1) / bps) * bps, 0);
  const auto data = modulate(coded, mcs.modulation);
  frame.insert(frame.end(), data.begin(), data.end());
  return frame;
}

IqBuffer tx_chain(std::span<const std::uint8_t> payload, const scenario::McsProfile& mcs, std::size_t mcs_index,
                  const PulseParams& pulse, double symbol_rate_hz) {
  const auto frame = build_frame(payload, mcs, mcs_index);
  return pulse_shape(frame, pulse, symbol_rate_hz);
}

namespace {

struct Alignment {
  PilotStats pilots;
  double cfo_hz = 0.0;  // applied correction
};

// Measures the preamble at `offset`, deciding whether the CFO estimate is
// significant enough to apply.
Alignment align(std::span<const cf32> symbols, std::size_t offset, double cfo_hz, const RxOptions& options) {
  const auto known = preamble_symbols();
  const auto pre = symbols.subspan(offset, kPreambleSymbols);
  Alignment a;
  a.pilots = pilot_stats(pre, known);
  if (cfo_hz == 0.0) return a;

  std::vector<cf32> rotated(pre.begin(), pre.end());
  derotate(rotated, cfo_hz, options.symbol_rate_hz, 0);
  const PilotStats corrected = pilot_stats(rotated, known);
  const double n = static_cast<double>(kPreambleSymbols);
  const double rho = corrected.noise_power > 0.0 ? corrected.signal_power / corrected.noise_power : 1e12;
  // Cramer-Rao bound for the frequency of a tone in white noise, rad/symbol.
  const double sigma_w = std::sqrt(6.0 / (std::max(rho, 1e-6) * n * (n * n - 1.0)));
  const double w = 2.0 * std::numbers::pi * cfo_hz / options.symbol_rate_hz;
  if (std::abs(w) > options.cfo_significance * sigma_w) {
    a.pilots = corrected;
    a.cfo_hz = cfo_hz;
  }
  return a;
}

// Second-order decision-directed loop removing the phase drift left by an
// imperfect CFO correction. Returns the loop state for the next segment.
struct PhaseLoop {
  double phase = 0.0;
  double freq = 0.0;  // rad/symbol
};

constexpr double kLoopGain = 0.03;
constexpr double kLoopFreqGain = kLoopGain * kLoopGain / 4.0;

void track_phase(std::span<cf32> symbols, scenario::Modulation m, PhaseLoop& loop) {
  const auto points = constellation(m);
  for (auto& y : symbols) {
    const cf32 z = y * std::polar(1.0F, static_cast<float>(-loop.phase));
    cf32 d = points[0];
    for (const auto& p : points)
      if (std::norm(z - p) < std::norm(z - d)) d = p;
    const double e = std::arg(std::complex<double>(z) * std::conj(std::complex<double>(d)));
    loop.freq += kLoopFreqGain * e;
    loop.phase += loop.freq + kLoopGain * e;
    y = z;
  }
}

}  // namespace

RxResult rx_chain(const IqBuffer& buffer, std::span<const scenario::McsProfile> table, const PulseParams& pulse,
                  const RxOptions& options) {
  auto symbols = matched_filter(buffer, pulse);
  RxResult r;
  r.sync = frame_sync(symbols, preamble_symbols(), options.symbol_rate_hz, options.sync);
  if (!r.sync.found) throw Error(Errc::NoFrameFound, "preamble");
  const std::size_t offset = r.sync.offset;
  if (symbols.size() < offset + kPreambleSymbols + kHeaderSymbols) throw Error(Errc::NoFrameFound, "truncated");

  const Alignment a = align(symbols, offset, r.sync.cfo_hz, options);
  r.pilots = a.pilots;
  r.snr = estimate_snr(std::span<const cf32>(symbols).subspan(offset, kPreambleSymbols), preamble_symbols());
  std::span<cf32> frame = std::span<cf32>(symbols).subspan(offset);
  if (a.cfo_hz != 0.0) {
    derotate(frame, a.cfo_hz, options.symbol_rate_hz, 0);
    r.snr = estimate_snr(frame.first(kPreambleSymbols), preamble_symbols());
  }

  const std::complex<double> gain = a.pilots.amplitude;
  if (std::abs(gain) == 0.0) throw Error(Errc::NoFrameFound, "zero gain");
  const cf32 inv(std::complex<double>(1.0) / gain);
  for (auto& s : frame) s *= inv;
  const double noise_var = a.pilots.noise_power / std::norm(gain);
  // Residual drift only matters once a CFO has been corrected. The loop
  // starts at zero phase, which the gain normalisation referred to the preamble.
  PhaseLoop loop;
  if (a.cfo_hz != 0.0) track_phase(frame.subspan(kPreambleSymbols, kHeaderSymbols), scenario::Modulation::BPSK, loop);

  // Header: combine the three copies' LLRs before deciding.
  const auto header_llr = demodulate_soft(frame.subspan(kPreambleSymbols, kHeaderSymbols), scenario::Modulation::BPSK, noise_var);
  unsigned header = 0;
  for (std::size_t i = 0; i < kHeaderBits; ++i) {
    float sum = 0.0F;
    for (std::size_t rep = 0; rep < kHeaderRepeats; ++rep) sum += header_llr[rep * kHeaderBits + i];
    header = (header << 1) | (sum < 0.0F ? 1U : 0U);
  }
  r.mcs_index = header >> 12;
  const std::size_t payload_bytes = header & 0xFFFU;
  if (r.mcs_index >= table.size() || payload_bytes > kMaxPayloadBytes) throw Error(Errc::NoFrameFound, "bad header");
  const auto& mcs = table[r.mcs_index];
  const std::size_t n_payload_syms = payload_symbol_count(payload_bytes, mcs);
  const std::size_t data_start = kPreambleSymbols + kHeaderSymbols;
  if (frame.size() < data_start + n_payload_syms) throw Error(Errc::NoFrameFound, "truncated payload");

  if (a.cfo_hz != 0.0) track_phase(frame.subspan(data_start, n_payload_syms), mcs.modulation, loop);
  auto llr = demodulate_soft(frame.subspan(data_start, n_payload_syms), mcs.modulation, noise_var);
  llr.resize(coded_length(payload_bytes * 8, mcs.code_rate));
  const Bits bits = viterbi_decode(llr, mcs.code_rate);
  r.payload = bits_to_bytes(bits);
  return r;
}

ProbeMeasurement measure_probe(const IqBuffer& buffer, const PulseParams& pulse, const RxOptions& options) {
  const auto symbols = matched_filter(buffer, pulse);
  if (symbols.size() < kPreambleSymbols) throw Error(Errc::NoFrameFound, "short buffer");
  ProbeMeasurement m;
  m.sync = frame_sync(symbols, preamble_symbols(), options.symbol_rate_hz, options.sync);
  if (m.sync.found) {
    m.pilots = align(symbols, m.sync.offset, m.sync.cfo_hz, options).pilots;
  } else {
    m.pilots = pilot_stats(std::span<const cf32>(symbols).first(kPreambleSymbols), preamble_symbols());
  }
  return m;
}

}  // namespace emulab::phy
