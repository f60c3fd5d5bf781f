#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "emulab/error.hpp"
#include "emulab/scenario.hpp"

namespace emulab::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "emulab-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Code of the emulab::Error thrown by fn, or nullopt if it returns.
template <class F>
std::optional<Errc> errc_of(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }
inline double db(double ratio) { return 10.0 * std::log10(ratio); }
inline double undb(double d) { return std::pow(10.0, d / 10.0); }

// Two terminals and a transponder with cabled links of fixed attenuation, so
// the symbol SNR at a given gain follows by hand:
//   Es/N0 = max_tx - (gain_max - gain) - loss - (N0 + 10 log10 B) + 10 log10 sps
struct Bench {
  double max_tx_dbm = 10.0;
  double loss_db = 100.0;
  double bandwidth_hz = 1e6;
  double noise_dbm_hz = -174.0;
  int sps = 4;
  double gain_max_db = 30.0;

  double snr_at(double gain_db) const {
    return max_tx_dbm - (gain_max_db - gain_db) - loss_db - (noise_dbm_hz + db(bandwidth_hz)) + db(sps);
  }
  double gain_for(double snr_db) const { return snr_db - snr_at(0.0); }
};

inline scenario::Scenario bench_scenario(const Bench& b = {}, int links = 1) {
  using namespace scenario;
  Scenario s;
  s.name = "bench";
  s.seed = 7;
  s.noise_floor_dbm_hz = b.noise_dbm_hz;
  s.mcs_table = default_mcs_table();
  s.phy.sps = b.sps;
  s.frontend.gain_max_db = b.gain_max_db;
  s.nodes = {{"a", NodeKind::Terminal, {0, 0, 0}, 0.0, b.max_tx_dbm},
             {"b", NodeKind::Hub, {1000, 0, 0}, 0.0, b.max_tx_dbm},
             {"sat", NodeKind::Transponder, {0, 0, 35786e3}, 0.0, b.max_tx_dbm},
             {"jam", NodeKind::Jammer, {0, 1000, 0}, 0.0, 60.0}};
  const char* ids[] = {"ab", "ba"};
  for (int i = 0; i < links; ++i) {
    LinkSpec l;
    l.link_id = ids[i];
    l.tx_node = i == 0 ? "a" : "b";
    l.rx_node = i == 0 ? "b" : "a";
    l.carrier_hz = 2.0e9 + i * 50e6;
    l.bandwidth_hz = b.bandwidth_hz;
    l.target_snr_db = 10.0;
    l.initial_mcs = "QPSK-1/2";
    l.path_loss_db = b.loss_db;
    s.links.push_back(l);
  }
  return s;
}

}  // namespace emulab::test

#include "emulab/configdb.hpp"

namespace emulab::test {

// Tx/Rx records and ownerships for every traffic link, serials TX-<link> and
// RX-<link>, at the given transmit gain.
inline void populate(configdb::Store& store, const scenario::Scenario& s, double gain_db) {
  std::int64_t id = 0;
  for (const auto& l : s.links) store.register_link(l.link_id);
  for (const auto* l : s.traffic_links()) {
    ++id;
    configdb::ConfigRecord tx{id, "TX-" + l->link_id, configdb::Table::Tx, l->carrier_hz, l->bandwidth_hz,
                              l->bandwidth_hz, gain_db, l->initial_mcs, 0, {}};
    auto rx = tx;
    rx.frontend_serial = "RX-" + l->link_id;
    rx.table = configdb::Table::Rx;
    rx.gain_db = s.frontend.gain_min_db;
    store.upsert(tx);
    store.upsert(rx);
    store.assign(l->link_id, tx.frontend_serial, configdb::Table::Tx);
    store.assign(l->link_id, rx.frontend_serial, configdb::Table::Rx);
  }
}

}  // namespace emulab::test
