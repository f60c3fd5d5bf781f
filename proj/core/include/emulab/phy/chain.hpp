#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "emulab/phy/pulse.hpp"
#include "emulab/phy/snr.hpp"
#include "emulab/phy/sync.hpp"
#include "emulab/phy/types.hpp"
#include "emulab/scenario.hpp"

// End-to-end frame chains.
//
// Frame layout at symbol rate:
//   64 QPSK preamble | 48 BPSK header | payload symbols
// The header carries a 4-bit MCS table index and a 12-bit payload length in
// bytes (MSB first), sent three times back to back. The payload is the
// convolutionally coded bytes, zero-padded to a whole number of symbols.
namespace emulab::phy {

constexpr std::size_t kHeaderBits = 16;
constexpr std::size_t kHeaderRepeats = 3;
constexpr std::size_t kHeaderSymbols = kHeaderBits * kHeaderRepeats;
constexpr std::size_t kMaxPayloadBytes = kMaxPayloadBits / 8;

std::size_t payload_symbol_count(std::size_t payload_bytes, const scenario::McsProfile& mcs);
std::size_t frame_symbol_count(std::size_t payload_bytes, const scenario::McsProfile& mcs);

// Symbol-rate frame (before pulse shaping).
std::vector<cf32> build_frame(std::span<const std::uint8_t> payload, const scenario::McsProfile& mcs,
                              std::size_t mcs_index);

IqBuffer tx_chain(std::span<const std::uint8_t> payload, const scenario::McsProfile& mcs, std::size_t mcs_index,
                  const PulseParams& pulse, double symbol_rate_hz = 1.0);

struct RxOptions {
  SyncOptions sync;
  double symbol_rate_hz = 1.0;
  // A CFO estimate is applied only when it exceeds this many standard
  // deviations of the estimator at the measured SNR; smaller values are
  // indistinguishable from zero and would only add phase drift.
  double cfo_significance = 5.0;
};

struct RxResult {
  std::vector<std::uint8_t> payload;
  SnrEstimate snr;
  PilotStats pilots;
  SyncResult sync;
  std::size_t mcs_index = 0;
};

// Throws NoFrameFound when no preamble clears the threshold or the header is
// not decodable against `table`.
RxResult rx_chain(const IqBuffer& buffer, std::span<const scenario::McsProfile> table, const PulseParams& pulse,
                  const RxOptions& options = {});

// Pilot-only measurement used for SNR feedback. When the preamble is not
// detected the nominal slot (offset 0, no CFO correction) is measured, which
// is exact in the sample-synchronous simulator.
struct ProbeMeasurement {
  PilotStats pilots;
  SyncResult sync;
};

ProbeMeasurement measure_probe(const IqBuffer& buffer, const PulseParams& pulse, const RxOptions& options = {});

}  // namespace emulab::phy
