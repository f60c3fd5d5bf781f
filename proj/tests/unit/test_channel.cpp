#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "emulab/channel.hpp"
#include "emulab/error.hpp"
#include "emulab/phy/chain.hpp"
#include "emulab/rng.hpp"
#include "test_support.hpp"

using namespace emulab;
using namespace emulab::channel;
using test::db;
using test::undb;

namespace {

constexpr double kC = 299792458.0;

double fspl(double d, double f) { return 20.0 * std::log10(4.0 * std::numbers::pi * d * f / kC); }

phy::IqBuffer probe_tx(const scenario::Scenario& s, const scenario::LinkSpec& l, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> payload(16);
  for (auto& b : payload) b = rng.byte();
  return phy::tx_chain(payload, s.mcs_table[0], 0, {s.phy.sps, s.phy.rolloff}, l.bandwidth_hz / s.phy.sps);
}

double measured_snr(Channel& ch, const scenario::Scenario& s, const std::string& link, int frames = 20) {
  const auto& l = *s.find_link(link);
  phy::SnrAccumulator acc;
  for (int f = 0; f < frames; ++f) {
    const auto rx = ch.propagate(link, probe_tx(s, l, f), 1000 + f);
    acc.add(phy::measure_probe(rx, {s.phy.sps, s.phy.rolloff}, {{}, l.bandwidth_hz / s.phy.sps}).pilots);
  }
  return acc.result().snr_db;
}

struct Fixture {
  test::TempDir dir;
  test::Bench bench;
  std::shared_ptr<scenario::Scenario> s;
  std::unique_ptr<configdb::Store> store;
  std::unique_ptr<Channel> ch;

  explicit Fixture(double gain = 20.0, int links = 1, std::function<void(scenario::Scenario&)> tweak = {}) {
    s = std::make_shared<scenario::Scenario>(test::bench_scenario(bench, links));
    if (tweak) tweak(*s);
    store = std::make_unique<configdb::Store>(dir / "db.journal");
    test::populate(*store, *s, gain);
    ch = std::make_unique<Channel>(s, *store);
  }
};

}  // namespace

TEST_CASE("free-space loss matches Friis") {
  CHECK(free_space_loss_db(35786e3, 14e9) == doctest::Approx(fspl(35786e3, 14e9)).epsilon(1e-9));
  CHECK(free_space_loss_db(1000.0, 2.4e9) == doctest::Approx(100.05).epsilon(1e-3));
  const scenario::NodeSpec a{"a", scenario::NodeKind::Terminal, {0, 0, 0}, 30.0, 0.0};
  const scenario::NodeSpec b{"b", scenario::NodeKind::Hub, {3000, 4000, 0}, 12.0, 0.0};
  CHECK(path_loss_db(a, b, 1e9) == doctest::Approx(fspl(5000.0, 1e9) - 42.0));
  try {
    path_loss_db(a, a, 1e9);
    FAIL("expected CoincidentNodes");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CoincidentNodes);
  }
}

TEST_CASE("cabled link budget") {
  Fixture f(20.0);
  const auto b = link_budget(*f.ch->snapshot(), f.s->links[0]);
  CHECK(b.tx_power_dbm == doctest::Approx(f.bench.max_tx_dbm - 10.0));
  CHECK(b.loss_db == doctest::Approx(f.bench.loss_db));
  CHECK(b.signal_dbm == doctest::Approx(f.bench.max_tx_dbm - 10.0 - f.bench.loss_db));
  CHECK(b.noise_dbm == doctest::Approx(-174.0 + 60.0));
  CHECK_FALSE(b.relayed);
  CHECK(analytic_sinr_db(b, 4, 0.35) == doctest::Approx(f.bench.snr_at(20.0)));
}

TEST_CASE("relayed budget adds both legs less the transponder gain") {
  Fixture f(30.0, 1, [](scenario::Scenario& s) {
    s.links[0].path_loss_db.reset();
    s.transponder = {14e9, 11.7e9, 100.0, 10.0};
    s.links[0].carrier_hz = 14e9;
  });
  const double up = fspl(35786e3, 14e9);
  const double down = fspl(std::hypot(1000.0, 35786e3), 11.7e9);
  const auto b = link_budget(*f.ch->snapshot(), f.s->links[0]);
  CHECK(b.relayed);
  CHECK(b.carrier_rx_hz == doctest::Approx(11.7e9));
  CHECK(b.loss_db == doctest::Approx(up - 100.0 + down).epsilon(1e-9));
}

TEST_CASE("noise-free propagation is a pure scaling and deterministic") {
  Fixture f(30.0, 1, [](scenario::Scenario& s) { s.noise_floor_dbm_hz = -std::numeric_limits<double>::infinity(); });
  const auto tx = probe_tx(*f.s, f.s->links[0], 1);
  const auto rx = f.ch->propagate("ab", tx, 1);
  const double a = std::sqrt(undb(f.bench.max_tx_dbm - f.bench.loss_db));
  for (std::size_t i = 0; i < tx.samples.size(); i += 7)
    CHECK(std::abs(std::complex<double>(rx.samples[i]) - a * std::complex<double>(tx.samples[i])) < 1e-6 * a);
}

TEST_CASE("noisy propagation is reproducible per frame counter") {
  Fixture f;
  const auto tx = probe_tx(*f.s, f.s->links[0], 1);
  const auto r1 = f.ch->propagate("ab", tx, 5);
  const auto r2 = f.ch->propagate("ab", tx, 5);
  const auto r3 = f.ch->propagate("ab", tx, 6);
  CHECK(r1.samples == r2.samples);
  CHECK(r1.samples != r3.samples);
  CHECK_THROWS_AS(f.ch->propagate("nope", tx, 1), Error);
}

TEST_CASE("measured SNR follows the budget") {
  for (double gain : {5.0, 15.0, 25.0}) {
    Fixture f(gain);
    CAPTURE(gain);
    CHECK(std::abs(measured_snr(*f.ch, *f.s, "ab") - f.bench.snr_at(gain)) < 0.5);
  }
}

TEST_CASE("set_gain clamps, persists and reaches the channel state") {
  Fixture f(10.0);
  CHECK(f.ch->set_gain("TX-ab", 42.0) == 30.0);
  CHECK(f.store->find(configdb::Table::Tx, "TX-ab")->gain_db == 30.0);
  CHECK(f.ch->snapshot()->frontends.at("TX-ab").gain_db == 30.0);
  CHECK(f.ch->set_gain("TX-ab", -3.0) == 0.0);
  CHECK_THROWS_AS(f.ch->set_gain("nope", 1.0), Error);

  // Writes made directly to the store are picked up too.
  auto rec = *f.store->find(configdb::Table::Tx, "TX-ab");
  rec.gain_db = 17.0;
  f.store->upsert(rec);
  CHECK(f.ch->snapshot()->frontends.at("TX-ab").gain_db == 17.0);
}

TEST_CASE("links without owned front ends are reported") {
  test::TempDir dir;
  auto s = std::make_shared<scenario::Scenario>(test::bench_scenario());
  configdb::Store store(dir / "db.journal");
  Channel ch(s, store);
  try {
    ch.propagate("ab", probe_tx(*s, s->links[0], 1), 1);
    FAIL("expected ConfigMissing");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigMissing);
  }
}

TEST_CASE("jammer controls") {
  Fixture f(20.0, 1, [](scenario::Scenario& s) {
    s.jammers.push_back({"jam", scenario::JammerWaveform::WidebandNoise, 0.0, 2e9, 2e6, false});
  });
  CHECK(link_budget(*f.ch->snapshot(), f.s->links[0]).jammers.empty());
  f.ch->set_jammer_active("jam", true);
  CHECK(link_budget(*f.ch->snapshot(), f.s->links[0]).jammers.size() == 1);
  CHECK_THROWS_AS(f.ch->set_jammer_power("jam", 61.0), Error);
  CHECK_THROWS_AS(f.ch->set_jammer_active("a", true), Error);
  f.ch->set_jammer_power("jam", 10.0);
  CHECK(f.ch->snapshot()->jammers[0].power_dbm == 10.0);
}

TEST_CASE("white noise jammer adds to the noise floor") {
  // Jammer received at the same level as the thermal noise: SINR falls by 3 dB.
  test::Bench bench;
  const double noise_dbm = bench.noise_dbm_hz + db(bench.bandwidth_hz);
  const scenario::NodeSpec jam{"jam", scenario::NodeKind::Jammer, {0, 1000, 0}, 0.0, 60.0};
  const scenario::NodeSpec b{"b", scenario::NodeKind::Hub, {1000, 0, 0}, 0.0, 10.0};
  // 4 MHz emission, a quarter of it inside the 1 MHz simulated band.
  const double jam_power = noise_dbm + path_loss_db(jam, b, 2e9) + db(4.0);
  Fixture f(20.0, 1, [&](scenario::Scenario& s) {
    s.jammers.push_back({"jam", scenario::JammerWaveform::WidebandNoise, jam_power, 2e9, 4e6, true});
  });
  const auto budget = link_budget(*f.ch->snapshot(), f.s->links[0]);
  CHECK(analytic_sinr_db(budget, 4, 0.35) == doctest::Approx(bench.snr_at(20.0) - db(2.0)).epsilon(1e-3));
  CHECK(std::abs(measured_snr(*f.ch, *f.s, "ab") - (bench.snr_at(20.0) - db(2.0))) < 0.5);
}
