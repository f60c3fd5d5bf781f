#include "emulab/channel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "emulab/error.hpp"
#include "emulab/phy/pulse.hpp"
#include "emulab/rng.hpp"

namespace emulab::channel {

namespace {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kJammerRolloff = 0.35;
// Noise jammers wider than this fraction of the simulated band are generated
// white across the whole band.
constexpr double kWhiteFraction = 0.6;

double db_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }

const NodeSpec& node(const Scenario& s, std::string_view id) {
  const NodeSpec* n = s.find_node(id);
  if (n == nullptr) throw Error(Errc::UnknownNode, std::string(id));
  return *n;
}

// Portion of a noise jammer that lands in [-fs/2, fs/2].
struct Band {
  double center_hz = 0.0;
  double width_hz = 0.0;
  double power_mw = 0.0;
  bool white = false;
};

std::optional<Band> in_band(const JammerContribution& j, double fs) {
  const double p = db_to_mw(j.power_dbm);
  if (j.waveform == JammerWaveform::Tone) {
    if (std::abs(j.offset_hz) >= fs / 2.0) return std::nullopt;
    return Band{j.offset_hz, 0.0, p, false};
  }
  const double lo = std::max(j.offset_hz - j.bandwidth_hz / 2.0, -fs / 2.0);
  const double hi = std::min(j.offset_hz + j.bandwidth_hz / 2.0, fs / 2.0);
  if (hi <= lo) return std::nullopt;
  Band b{(lo + hi) / 2.0, hi - lo, p * (hi - lo) / j.bandwidth_hz, false};
  if (b.width_hz > kWhiteFraction * fs) b = Band{0.0, fs, b.power_mw, true};
  return b;
}

// Raised-cosine power shape, peak 1, for symbol rate rs.
double raised_cosine(double f, double rs, double beta) {
  const double a = std::abs(f);
  const double f1 = (1.0 - beta) * rs / 2.0;
  const double f2 = (1.0 + beta) * rs / 2.0;
  if (a <= f1) return 1.0;
  if (a >= f2) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi / (beta * rs) * (a - f1)));
}

void add_tone(std::vector<std::complex<double>>& acc, const Band& b, double fs, Rng& rng) {
  const double amp = std::sqrt(b.power_mw);
  const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double w = 2.0 * std::numbers::pi * b.center_hz / fs;
  for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += std::polar(amp, phase0 + w * static_cast<double>(n));
}

void add_noise_jammer(std::vector<std::complex<double>>& acc, const Band& b, double fs, Rng& rng) {
  if (b.white) {
    for (auto& v : acc) v += rng.complex_gaussian(b.power_mw);
    return;
  }
  const double sps = fs * (1.0 + kJammerRolloff) / b.width_hz;
  const auto taps = phy::rrc_prototype(sps, kJammerRolloff);
  const std::size_t nt = taps.size();
  std::vector<std::complex<double>> white(acc.size() + nt - 1);
  for (auto& v : white) v = rng.complex_gaussian(b.power_mw);
  const double w = 2.0 * std::numbers::pi * b.center_hz / fs;
  for (std::size_t n = 0; n < acc.size(); ++n) {
    std::complex<double> y;
    for (std::size_t k = 0; k < nt; ++k) y += static_cast<double>(taps[k]) * white[n + nt - 1 - k];
    acc[n] += y * std::polar(1.0, w * static_cast<double>(n));
  }
}

void add_jammer(std::vector<std::complex<double>>& acc, const JammerContribution& j, double fs, Rng& rng) {
  const auto band = in_band(j, fs);
  if (!band) return;
  if (j.waveform == JammerWaveform::Tone) add_tone(acc, *band, fs, rng);
  else add_noise_jammer(acc, *band, fs, rng);
}

}  // namespace

double free_space_loss_db(double distance_m, double carrier_hz) {
  return 20.0 * std::log10(distance_m) + 20.0 * std::log10(carrier_hz) +
         20.0 * std::log10(4.0 * std::numbers::pi / kSpeedOfLight);
}

double path_loss_db(const NodeSpec& tx, const NodeSpec& rx, double carrier_hz) {
  const double dx = tx.position[0] - rx.position[0];
  const double dy = tx.position[1] - rx.position[1];
  const double dz = tx.position[2] - rx.position[2];
  const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (d == 0.0) throw Error(Errc::CoincidentNodes, tx.node_id + "," + rx.node_id);
  return free_space_loss_db(d, carrier_hz) - tx.antenna_gain_db - rx.antenna_gain_db;
}

LinkBudget link_budget(const ChannelState& state, const LinkSpec& link) {
  const Scenario& s = *state.scenario;
  auto ep = state.endpoints.find(link.link_id);
  if (ep == state.endpoints.end()) throw Error(Errc::ConfigMissing, link.link_id, "link has no owned front ends");
  auto txf = state.frontends.find(ep->second.tx_serial);
  if (txf == state.frontends.end()) throw Error(Errc::ConfigMissing, ep->second.tx_serial);
  if (state.frontends.find(ep->second.rx_serial) == state.frontends.end())
    throw Error(Errc::ConfigMissing, ep->second.rx_serial);

  const NodeSpec& tx = node(s, link.tx_node);
  const NodeSpec& rx = node(s, link.rx_node);
  const NodeSpec* xp = s.transponder_node();
  const auto& xm = state.transponder;

  LinkBudget b;
  b.tx_power_dbm = tx.max_tx_power_dbm - (s.frontend.gain_max_db - txf->second.gain_db);
  b.carrier_rx_hz = link.carrier_hz;
  b.bandwidth_hz = link.bandwidth_hz;
  const bool through_xp = xp != nullptr && !link.path_loss_db && tx.node_id != xp->node_id && rx.node_id != xp->node_id;
  if (link.path_loss_db) {
    b.loss_db = *link.path_loss_db;
  } else if (through_xp) {
    b.relayed = true;
    b.carrier_rx_hz = link.carrier_hz + (xm.downlink_hz - xm.uplink_hz);
    b.loss_db = path_loss_db(tx, *xp, link.carrier_hz) - xm.gain_db + path_loss_db(*xp, rx, b.carrier_rx_hz);
  } else {
    b.loss_db = path_loss_db(tx, rx, link.carrier_hz);
  }
  b.signal_dbm = b.tx_power_dbm - b.loss_db;
  b.noise_dbm = std::isfinite(s.noise_floor_dbm_hz) ? s.noise_floor_dbm_hz + 10.0 * std::log10(link.bandwidth_hz)
                                                    : -std::numeric_limits<double>::infinity();

  const bool xp_forwards = xp != nullptr && !link.path_loss_db && (through_xp || tx.node_id == xp->node_id);
  for (const auto& j : state.jammers) {
    if (!j.active) continue;
    const NodeSpec& jn = node(s, j.node_id);
    if (jn.node_id != rx.node_id) {
      b.jammers.push_back({j.node_id, j.power_dbm - path_loss_db(jn, rx, b.carrier_rx_hz), j.center_hz - b.carrier_rx_hz,
                           j.bandwidth_hz, j.waveform, false});
    }
    if (xp_forwards && jn.node_id != xp->node_id) {
      const double translated = j.center_hz + (xm.downlink_hz - xm.uplink_hz);
      const double p = j.power_dbm - path_loss_db(jn, *xp, j.center_hz) + xm.gain_db - path_loss_db(*xp, rx, b.carrier_rx_hz);
      b.jammers.push_back({j.node_id, p, translated - b.carrier_rx_hz, j.bandwidth_hz, j.waveform, true});
    }
  }
  return b;
}

double analytic_sinr_db(const LinkBudget& budget, int sps, double rolloff) {
  const double fs = budget.bandwidth_hz;
  const double rs = fs / sps;
  double impairment = std::isfinite(budget.noise_dbm) ? db_to_mw(budget.noise_dbm) / sps : 0.0;
  for (const auto& j : budget.jammers) {
    const auto band = in_band(j, fs);
    if (!band) continue;
    if (j.waveform == JammerWaveform::Tone) {
      impairment += band->power_mw * raised_cosine(band->center_hz, rs, rolloff);
    } else if (band->white) {
      impairment += band->power_mw / sps;
    } else {
      // Jammer PSD (raised-cosine shaped) weighted by the matched filter's
      // power response, integrated numerically.
      const double rs_j = band->width_hz / (1.0 + kJammerRolloff);
      constexpr int kSteps = 4000;
      const double lo = band->center_hz - band->width_hz / 2.0;
      const double df = band->width_hz / kSteps;
      double acc = 0.0;
      for (int k = 0; k < kSteps; ++k) {
        const double f = lo + (k + 0.5) * df;
        acc += raised_cosine(f - band->center_hz, rs_j, kJammerRolloff) * raised_cosine(f, rs, rolloff) * df;
      }
      impairment += band->power_mw * acc / rs_j;
    }
  }
  return 10.0 * std::log10(db_to_mw(budget.signal_dbm) / impairment);
}

phy::IqBuffer propagate(const ChannelState& state, const LinkSpec& link, const phy::IqBuffer& tx,
                        std::uint64_t frame_counter) {
  const LinkBudget b = link_budget(state, link);
  const Scenario& s = *state.scenario;
  const double fs = link.bandwidth_hz;
  const std::size_t n = tx.samples.size();
  Rng rng(s.seed, "channel/" + link.link_id, frame_counter);

  phy::IqBuffer out;
  out.sample_rate_hz = fs;
  out.center_freq_hz = b.carrier_rx_hz;
  out.samples.resize(n);

  const double a_sig = std::sqrt(db_to_mw(b.signal_dbm));
  const bool through_xp = b.relayed || (s.transponder_node() != nullptr && !link.path_loss_db &&
                                        link.tx_node == s.transponder_node()->node_id);
  const bool plain = link.cfo_hz == 0.0 && !through_xp && b.jammers.empty() && !std::isfinite(b.noise_dbm);
  if (plain) {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = phy::cf32(std::complex<double>(tx.samples[i]) * a_sig);
    return out;
  }

  std::vector<std::complex<double>> acc(n);
  const double w_cfo = 2.0 * std::numbers::pi * link.cfo_hz / fs;
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> v = std::complex<double>(tx.samples[i]) * a_sig;
    if (w_cfo != 0.0) v *= std::polar(1.0, w_cfo * static_cast<double>(i));
    acc[i] = v;
  }
  if (through_xp) {
    for (const auto& j : b.jammers)
      if (j.via_transponder) add_jammer(acc, j, fs, rng);
    // Receiver-referred clip level; everything after the transponder is linear.
    const double clip = state.transponder.saturation_amplitude * a_sig;
    for (auto& v : acc) {
      const double m = std::abs(v);
      if (m > clip) v *= clip / m;
    }
  }
  for (const auto& j : b.jammers)
    if (!j.via_transponder) add_jammer(acc, j, fs, rng);
  if (std::isfinite(b.noise_dbm)) {
    const double var = db_to_mw(b.noise_dbm);
    for (auto& v : acc) v += rng.complex_gaussian(var);
  }
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = phy::cf32(acc[i]);
  return out;
}

// ---- Channel ----------------------------------------------------------------

Channel::Channel(std::shared_ptr<const Scenario> scenario, configdb::Store& store)
    : scenario_(std::move(scenario)), store_(store), state_(std::make_shared<ChannelState>()) {
  const Scenario& s = *scenario_;
  state_->scenario = scenario_;
  state_->transponder = {s.transponder.uplink_hz, s.transponder.downlink_hz, s.transponder.gain_db,
                         s.transponder.saturation_amplitude};
  for (const auto& j : s.jammers)
    state_->jammers.push_back({j.node_id, j.waveform, j.power_dbm, j.center_hz, j.bandwidth_hz, j.active});
  for (const auto* l : s.traffic_links()) {
    auto tx = store_.owner(l->link_id, configdb::Table::Tx);
    auto rx = store_.owner(l->link_id, configdb::Table::Rx);
    if (!tx || !rx) continue;
    state_->endpoints[l->link_id] = {*tx, *rx};
    watches_.emplace("tx/" + *tx, store_.watch(configdb::Table::Tx, *tx));
    watches_.emplace("rx/" + *rx, store_.watch(configdb::Table::Rx, *rx));
  }
  std::lock_guard lock(mu_);
  refresh_locked();
}

void Channel::refresh_locked() {
  std::shared_ptr<ChannelState> next;
  for (auto& [key, w] : watches_) {
    const bool is_tx = key.rfind("tx/", 0) == 0;
    while (auto r = w.try_next()) {
      if (!next) next = std::make_shared<ChannelState>(*state_);
      auto& f = next->frontends[r->frontend_serial];
      // A serial present in both tables is driven by its Tx record.
      if (!is_tx && watches_.count("tx/" + r->frontend_serial)) continue;
      f = FrontendState{r->frontend_serial, r->gain_db, r->carrier_hz, r->sample_rate_hz, r->updated_at};
    }
  }
  if (next || dirty_) {
    if (!next) next = std::make_shared<ChannelState>(*state_);
    ++next->version;
    state_ = std::move(next);
    dirty_ = false;
  }
}

std::shared_ptr<const ChannelState> Channel::snapshot() {
  std::lock_guard lock(mu_);
  refresh_locked();
  return state_;
}

double Channel::set_gain(const std::string& serial, double gain_db) {
  auto rec = store_.find(configdb::Table::Tx, serial);
  if (!rec) rec = store_.find(configdb::Table::Rx, serial);
  if (!rec) throw Error(Errc::UnknownFrontend, serial);
  const auto& lim = scenario_->frontend;
  const double applied = std::clamp(gain_db, lim.gain_min_db, lim.gain_max_db);
  rec->gain_db = applied;
  store_.upsert(*rec);
  std::lock_guard lock(mu_);
  refresh_locked();
  return applied;
}

JammerEmitter& Channel::jammer_locked(const std::string& node_id) {
  auto next = std::make_shared<ChannelState>(*state_);
  state_ = next;
  dirty_ = true;
  for (auto& j : next->jammers)
    if (j.node_id == node_id) return j;
  throw Error(Errc::UnknownNode, node_id, "no jammer emitter on this node");
}

void Channel::set_jammer_active(const std::string& node_id, bool active) {
  std::lock_guard lock(mu_);
  jammer_locked(node_id).active = active;
  refresh_locked();
}

void Channel::set_jammer_power(const std::string& node_id, double power_dbm) {
  const NodeSpec* n = scenario_->find_node(node_id);
  if (n == nullptr) throw Error(Errc::UnknownNode, node_id);
  if (!std::isfinite(power_dbm) || power_dbm > n->max_tx_power_dbm)
    throw Error(Errc::BadParams, node_id, "jammer power exceeds max_tx_power_dbm");
  std::lock_guard lock(mu_);
  jammer_locked(node_id).power_dbm = power_dbm;
  refresh_locked();
}

phy::IqBuffer Channel::propagate(const std::string& link_id, const phy::IqBuffer& tx, std::uint64_t frame_counter) {
  const LinkSpec* link = scenario_->find_link(link_id);
  if (link == nullptr) throw Error(Errc::UnknownLink, link_id);
  return channel::propagate(*snapshot(), *link, tx, frame_counter);
}

}  // namespace emulab::channel
