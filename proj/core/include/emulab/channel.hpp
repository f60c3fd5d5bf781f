#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "emulab/configdb.hpp"
#include "emulab/phy/types.hpp"
#include "emulab/scenario.hpp"

// Simulated RF front ends and the propagation medium between them.
//
// Power bookkeeping is in milliwatts per complex sample. A transmit buffer is
// taken to have unit mean power; a front end at gain g radiates
//   P_tx = max_tx_power_dbm - (gain_max_db - g)
// so the node's rated power is reached at full gain. Each link is simulated
// at sample rate = bandwidth_hz, hence per-sample noise power is N0 * B.
namespace emulab::channel {

using scenario::JammerWaveform;
using scenario::LinkSpec;
using scenario::NodeSpec;
using scenario::Scenario;

struct FrontendState {
  std::string frontend_serial;
  double gain_db = 0.0;
  double carrier_hz = 0.0;
  double sample_rate_hz = 0.0;
  std::uint64_t revision = 0;
};

struct TransponderModel {
  double uplink_hz = 0.0;
  double downlink_hz = 0.0;
  double gain_db = 0.0;
  double saturation_amplitude = 10.0;  // multiple of the nominal relayed signal amplitude
};

struct JammerEmitter {
  std::string node_id;
  JammerWaveform waveform = JammerWaveform::Tone;
  double power_dbm = 0.0;
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
  bool active = false;
};

struct LinkEndpoints {
  std::string tx_serial;
  std::string rx_serial;
};

// Free-space loss between two nodes less both antenna gains.
// Throws CoincidentNodes when positions are equal.
double path_loss_db(const NodeSpec& tx, const NodeSpec& rx, double carrier_hz);
double free_space_loss_db(double distance_m, double carrier_hz);

// Immutable view of everything propagate() depends on.
struct ChannelState {
  std::shared_ptr<const Scenario> scenario;
  std::map<std::string, FrontendState, std::less<>> frontends;  // by serial
  std::map<std::string, LinkEndpoints, std::less<>> endpoints;  // by link id
  std::vector<JammerEmitter> jammers;
  TransponderModel transponder;
  std::uint64_t version = 0;
};

// One received contribution referred to the receiver input.
struct JammerContribution {
  std::string node_id;
  double power_dbm = 0.0;   // received power per sample, whole emission
  double offset_hz = 0.0;   // centre relative to the link carrier at the receiver
  double bandwidth_hz = 0.0;
  JammerWaveform waveform = JammerWaveform::Tone;
  bool via_transponder = false;
};

struct LinkBudget {
  double tx_power_dbm = 0.0;
  double loss_db = 0.0;        // total path loss less transponder gain
  double signal_dbm = 0.0;     // received signal power per sample
  double noise_dbm = 0.0;      // N0 * B, -inf when noise is disabled
  double carrier_rx_hz = 0.0;  // carrier at the receiver (after frequency translation)
  double bandwidth_hz = 0.0;   // simulated band, equal to the sample rate
  bool relayed = false;        // passes through the transponder
  std::vector<JammerContribution> jammers;
};

LinkBudget link_budget(const ChannelState& state, const LinkSpec& link);

// Symbol-level SINR implied by a budget for a matched-filter receiver with
// `sps` samples per symbol. Noise enters as N0 B / sps; each jammer enters
// with its power weighted by the filter's raised-cosine power response.
double analytic_sinr_db(const LinkBudget& budget, int sps, double rolloff);

// Applies the link's path to `tx`. Deterministic in (scenario seed, link id,
// frame_counter). Throws ConfigMissing when an endpoint has no front-end
// record.
phy::IqBuffer propagate(const ChannelState& state, const LinkSpec& link, const phy::IqBuffer& tx,
                        std::uint64_t frame_counter);

// Owner of the mutable channel state for one run. Front-end state mirrors the
// newest configdb record for each serial; gains written through set_gain are
// clamped to the scenario bounds and written back to the store.
class Channel {
 public:
  Channel(std::shared_ptr<const Scenario> scenario, configdb::Store& store);

  double set_gain(const std::string& frontend_serial, double gain_db);
  void set_jammer_active(const std::string& node_id, bool active);
  // Throws BadParams when power exceeds the node's max_tx_power_dbm.
  void set_jammer_power(const std::string& node_id, double power_dbm);

  // Drains pending configdb updates and returns the current state.
  std::shared_ptr<const ChannelState> snapshot();

  phy::IqBuffer propagate(const std::string& link_id, const phy::IqBuffer& tx, std::uint64_t frame_counter);

  const Scenario& scenario() const noexcept { return *scenario_; }

 private:
  void refresh_locked();
  JammerEmitter& jammer_locked(const std::string& node_id);

  std::shared_ptr<const Scenario> scenario_;
  configdb::Store& store_;
  std::mutex mu_;
  std::shared_ptr<ChannelState> state_;
  bool dirty_ = false;
  std::map<std::string, configdb::Watch> watches_;
};

}  // namespace emulab::channel
