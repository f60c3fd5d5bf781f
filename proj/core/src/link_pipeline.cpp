#include <algorithm>

#include "emulab/emud.hpp"
#include "emulab/error.hpp"
#include "emulab/phy/chain.hpp"
#include "emulab/rng.hpp"

namespace emulab::emud {

namespace {

std::vector<std::uint8_t> random_payload(std::uint64_t seed, const std::string& link_id, std::uint64_t counter,
                                         std::size_t bytes) {
  Rng rng(seed, "payload/" + link_id, counter);
  std::vector<std::uint8_t> out(bytes);
  for (auto& b : out) b = rng.byte();
  return out;
}

}  // namespace

LinkPipeline::LinkPipeline(std::shared_ptr<const scenario::Scenario> scenario, const scenario::LinkSpec& link,
                           channel::Channel& channel, configdb::Store& store, bus::Bus& bus, std::string tx_serial,
                           std::string rx_serial)
    : scenario_(std::move(scenario)),
      link_(link),
      channel_(channel),
      store_(store),
      bus_(bus),
      tx_serial_(std::move(tx_serial)),
      rx_serial_(std::move(rx_serial)),
      symbol_rate_hz_(link.bandwidth_hz / scenario_->phy.sps) {}

phy::IqBuffer LinkPipeline::transmit(std::span<const std::uint8_t> payload, std::size_t mcs_index) {
  const auto& s = *scenario_;
  const phy::PulseParams pulse{s.phy.sps, s.phy.rolloff};
  auto tx = phy::tx_chain(payload, s.mcs_table[mcs_index], mcs_index, pulse, symbol_rate_hz_);
  tx.center_freq_hz = link_.carrier_hz;
  return channel_.propagate(link_.link_id, tx, counter_);
}

calib::Feedback LinkPipeline::probe_burst(std::uint64_t burst) {
  const auto& s = *scenario_;
  const phy::PulseParams pulse{s.phy.sps, s.phy.rolloff};
  phy::RxOptions opts;
  opts.symbol_rate_hz = symbol_rate_hz_;
  phy::SnrAccumulator acc;
  for (int i = 0; i < s.calibration.probe_frames; ++i) {
    ++counter_;
    const auto payload = random_payload(s.seed, link_.link_id, counter_, static_cast<std::size_t>(s.phy.probe_payload_bytes));
    const auto rx = transmit(payload, 0);
    acc.add(phy::measure_probe(rx, pulse, opts).pilots);
  }
  const auto est = acc.result();
  calib::Feedback fb{burst, est.snr_db, est.n_symbols, s.calibration.probe_frames};
  bus_.publish("feedback." + link_.link_id, calib::encode_feedback(fb));
  return fb;
}

LinkPipeline::FrameResult LinkPipeline::traffic_frame() {
  const auto& s = *scenario_;
  const phy::PulseParams pulse{s.phy.sps, s.phy.rolloff};
  FrameResult r;
  const auto rec = store_.find(configdb::Table::Tx, tx_serial_);
  r.mcs_id = rec && s.find_mcs(rec->mcs_id) ? rec->mcs_id : link_.initial_mcs;
  const auto it = std::find_if(s.mcs_table.begin(), s.mcs_table.end(), [&](const auto& m) { return m.mcs_id == r.mcs_id; });
  const auto mcs_index = static_cast<std::size_t>(it - s.mcs_table.begin());

  ++counter_;
  const auto payload = random_payload(s.seed, link_.link_id, counter_, static_cast<std::size_t>(s.phy.payload_bytes));
  const auto rx = transmit(payload, mcs_index);
  phy::RxOptions opts;
  opts.symbol_rate_hz = symbol_rate_hz_;
  try {
    const auto result = phy::rx_chain(rx, s.mcs_table, pulse, opts);
    r.ok = result.payload == payload;
    r.pilots = result.pilots;
    r.snr_db = result.snr.snr_db;
    if (r.ok) bus_.publish("payload." + link_.link_id, std::span<const std::uint8_t>(result.payload));
  } catch (const Error& e) {
    if (e.code() != Errc::NoFrameFound) throw;
  }
  return r;
}

}  // namespace emulab::emud
