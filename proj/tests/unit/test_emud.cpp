#include <doctest.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "emulab/emud.hpp"
#include "emulab/error.hpp"
#include "test_support.hpp"

using namespace emulab;
using namespace emulab::emud;
using namespace std::chrono_literals;
using nlohmann::json;
using test::errc_of;

namespace {

EmulatorOptions options(const test::TempDir& dir, bool realtime, std::optional<double> duration = {}) {
  EmulatorOptions o;
  o.work_dir = dir.path();
  o.realtime = realtime;
  o.duration_s = duration;
  o.telemetry_period = 100ms;
  return o;
}

scenario::Scenario with_jammer(test::Bench b = {}) {
  auto s = test::bench_scenario(b, 2);
  s.jammers.push_back({"jam", scenario::JammerWaveform::WidebandNoise, 0.0, 2e9, 2e6, false});
  return s;
}

}  // namespace

TEST_CASE("commands parse and serialise") {
  for (const char* text : {R"({"op":"stop"})", R"({"op":"set_target_snr","link_id":"ab","snr_db":7.5})",
                           R"({"op":"toggle_jammer","node_id":"jam","active":true})",
                           R"({"op":"set_jammer_power","node_id":"jam","power_dbm":-3.0})",
                           R"({"op":"recalibrate","link_id":"ab"})"}) {
    const auto j = json::parse(text);
    CHECK(command_json(parse_command(j)) == j);
  }
  for (const char* text : {R"([])", R"({})", R"({"op":"reboot"})", R"({"op":"set_target_snr","link_id":"ab"})",
                           R"({"op":"set_target_snr","link_id":"ab","snr_db":"7"})",
                           R"({"op":"toggle_jammer","node_id":"jam","active":1})"}) {
    CAPTURE(text);
    CHECK(errc_of([&] { parse_command(json::parse(text)); }) == Errc::BadCommand);
  }
}

TEST_CASE("load assigns front ends and owners") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, false, 1.0));
  const auto id = emu.load(test::bench_scenario({}, 2));
  CHECK(id == "run-0001");
  CHECK(std::filesystem::exists(dir / "run-0001" / "config.journal"));
  auto* store = emu.store();
  CHECK(store->records(configdb::Table::Tx).size() == 2);
  CHECK(store->records(configdb::Table::Rx).size() == 2);
  for (const char* l : {"ab", "ba"}) {
    const auto tx = store->owner(l, configdb::Table::Tx);
    const auto rx = store->owner(l, configdb::Table::Rx);
    REQUIRE(tx);
    REQUIRE(rx);
    CHECK(store->lookup(*tx, configdb::Table::Tx) == l);
    CHECK(store->find(configdb::Table::Tx, *tx)->extras.at("link_id") == l);
    CHECK(store->find(configdb::Table::Tx, *tx)->gain_db == 15.0);
    CHECK(store->find(configdb::Table::Rx, *rx)->gain_db == 0.0);
  }
  for (const char* t : {"control.run-0001", "telemetry.run.run-0001", "telemetry.calib.ab", "telemetry.link.ba",
                        "feedback.ab", "payload.ba"})
    CHECK(bus.has_topic(t));
  const auto st = emu.status(id);
  CHECK(st.phase == Phase::Loaded);
  CHECK(st.links.size() == 2);
  CHECK(*emu.current_run() == id);

  CHECK(errc_of([&] { emu.load(test::bench_scenario()); }) == Errc::RunBusy);
  CHECK(errc_of([&] { emu.status("run-0009"); }) == Errc::UnknownRun);
  CHECK(errc_of([&] { emu.start("run-0009"); }) == Errc::UnknownRun);
}

TEST_CASE("invalid scenarios are rejected with violations") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, false));
  auto s = test::bench_scenario();
  s.links[0].tx_node = "nowhere";
  CHECK(errc_of([&] { emu.load(s); }) == Errc::ValidationFailed);
  CHECK_FALSE(emu.last_violations().empty());
  CHECK_FALSE(emu.current_run());
}

TEST_CASE("virtual-time run calibrates both links and delivers every frame") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, false, 2.0));
  auto s = test::bench_scenario({}, 2);
  for (auto& l : s.links) l.target_snr_db = 16.0;
  const auto id = emu.load(s);
  auto calib_sub = bus.subscribe("telemetry.calib.ab", bus::Mode::All);
  emu.start(id);
  CHECK(errc_of([&] { emu.start(id); }) == Errc::WrongPhase);
  REQUIRE(emu.wait_finished(60s));
  const auto st = emu.status(id);
  CHECK(st.phase == Phase::Stopped);
  CHECK(st.diagnostics.empty());
  for (const auto& l : st.links) {
    CAPTURE(l.link_id);
    CHECK(l.calib.status == calib::Status::Converged);
    CHECK(std::abs(*l.calib.measured_snr_db - 16.0) <= 0.5);
    CHECK(l.calib.iteration <= 3);
    CHECK(l.current_mcs == "8PSK-3/4");
    CHECK(l.frames_sent == 100);
    CHECK(l.frames_ok == 100);
    CHECK(l.emulated_s == doctest::Approx(2.0));
  }
  // One calib message per step plus the terminal one.
  int n = 0;
  std::optional<bus::Envelope> last;
  while (auto env = calib_sub->try_next()) {
    ++n;
    last = env;
  }
  REQUIRE(last);
  CHECK(json::parse(last->text())["status"] == "Converged");
  CHECK(n == st.links[0].calib.iteration + 1);

  // The next run gets a fresh id and store.
  const auto id2 = emu.load(test::bench_scenario({}, 2));
  CHECK(id2 == "run-0002");
  CHECK(emu.status(id2).phase == Phase::Loaded);
  CHECK(errc_of([&] { emu.status(id); }) == Errc::UnknownRun);
}

TEST_CASE("an unreachable target clips but traffic continues") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, false, 1.0));
  auto s = test::bench_scenario();
  s.links[0].target_snr_db = 80.0;
  const auto id = emu.load(s);
  emu.start(id);
  REQUIRE(emu.wait_calibrated(30s));
  REQUIRE(emu.wait_finished(30s));
  const auto st = emu.status(id);
  CHECK(st.diagnostics.empty());
  CHECK(st.phase == Phase::Stopped);
  CHECK(st.links[0].calib.status == calib::Status::Clipped);
  CHECK(st.links[0].gain_db == 30.0);
  CHECK(st.links[0].frames_sent == 50);
  CHECK(st.links[0].current_mcs == "QPSK-1/2");
}

TEST_CASE("stop freezes counters and later commands are refused") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, true));
  const auto id = emu.load(test::bench_scenario());
  emu.start(id);
  REQUIRE(emu.wait_calibrated(30s));
  CHECK(emu.status(id).phase == Phase::Active);
  std::this_thread::sleep_for(300ms);
  const auto ack = emu.control(id, {Command::Op::Stop});
  CHECK(ack.op == "stop");
  const auto before = emu.status(id);
  CHECK(before.phase == Phase::Stopped);
  CHECK(before.links[0].frames_sent > 0);
  std::this_thread::sleep_for(200ms);
  const auto after = emu.status(id);
  CHECK(after.links[0].frames_sent == before.links[0].frames_sent);
  CHECK(after.links[0].frames_ok == before.links[0].frames_ok);
  CHECK(errc_of([&] { emu.control(id, {Command::Op::Stop}); }) == Errc::WrongPhase);
  CHECK(errc_of([&] { emu.control(id, {Command::Op::Recalibrate, "ab"}); }) == Errc::WrongPhase);
  CHECK(errc_of([&] { emu.control("run-0042", {Command::Op::Stop}); }) == Errc::UnknownRun);
  CHECK(emu.wait_finished(5s));
}

TEST_CASE("commands are acknowledged before their effect is reported") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, true));
  const auto id = emu.load(test::bench_scenario());
  emu.start(id);
  REQUIRE(emu.wait_calibrated(30s));
  auto sub = bus.subscribe("telemetry.run." + id, bus::Mode::All);
  const auto ack = emu.control(id, {Command::Op::SetTargetSnr, "ab", "", 6.0});
  CHECK(ack.run_id == id);
  std::optional<bus::Envelope> snap;
  while (auto env = sub->next(2s)) {
    const auto j = json::parse(env->text());
    if (j["type"] == "run" && j["links"][0]["calib"]["target_snr_db"] == 6.0) {
      snap = env;
      break;
    }
  }
  REQUIRE(snap);
  CHECK(snap->timestamp_us > ack.timestamp_us);
  CHECK(errc_of([&] { emu.control(id, {Command::Op::SetTargetSnr, "zz", "", 6.0}); }) == Errc::UnknownLink);
  CHECK(errc_of([&] { emu.control(id, {Command::Op::SetTargetSnr, "ab", "", NAN}); }) == Errc::BadParams);

  // Recalibration moves the link to the new target.
  emu.control(id, {Command::Op::Recalibrate, "ab"});
  bool settled = false;
  for (int i = 0; i < 100 && !settled; ++i) {
    std::this_thread::sleep_for(50ms);
    const auto l = emu.status(id).links[0];
    settled = l.calib.status == calib::Status::Converged && l.calib.target_snr_db == 6.0 && l.calib.measured_snr_db &&
              std::abs(*l.calib.measured_snr_db - 6.0) <= 0.5;
  }
  CHECK(settled);
  emu.shutdown();
  CHECK(emu.status(id).phase == Phase::Stopped);
}

TEST_CASE("jammer commands reach the channel") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, true));
  const auto id = emu.load(with_jammer());
  CHECK(errc_of([&] { emu.control(id, {Command::Op::ToggleJammer, "", "jam", 0.0, true}); }) == Errc::WrongPhase);
  emu.start(id);
  REQUIRE(emu.wait_calibrated(30s));
  emu.control(id, {Command::Op::ToggleJammer, "", "jam", 0.0, true});
  emu.control(id, {Command::Op::SetJammerPower, "", "jam", -20.0});
  auto st = emu.status(id);
  REQUIRE(st.jammers.size() == 1);
  CHECK(st.jammers[0].active);
  CHECK(st.jammers[0].power_dbm == -20.0);
  CHECK(errc_of([&] { emu.control(id, {Command::Op::ToggleJammer, "", "zz", 0.0, true}); }) == Errc::UnknownNode);
  CHECK(errc_of([&] { emu.control(id, {Command::Op::SetJammerPower, "", "jam", 99.0}); }) == Errc::BadParams);
  emu.control(id, {Command::Op::ToggleJammer, "", "jam", 0.0, false});
  CHECK_FALSE(emu.status(id).jammers[0].active);
}

TEST_CASE("commands published on the control topic are answered on the run topic") {
  test::TempDir dir;
  bus::Bus bus;
  Emulator emu(bus, options(dir, true));
  const auto id = emu.load(test::bench_scenario());
  emu.start(id);
  REQUIRE(emu.wait_calibrated(30s));
  auto sub = bus.subscribe("telemetry.run." + id, bus::Mode::All);
  const auto next_ack = [&] {
    while (auto env = sub->next(2s)) {
      auto j = json::parse(env->text());
      if (j["type"] == "ack") return j;
    }
    return json();
  };
  bus.publish("control." + id, R"({"op":"reboot"})");
  auto a = next_ack();
  CHECK(a["ok"] == false);
  CHECK(a["error"].get<std::string>().find("BadCommand") != std::string::npos);
  bus.publish("control." + id, "not json");
  CHECK(next_ack()["ok"] == false);
  bus.publish("control." + id, R"({"op":"stop"})");
  a = next_ack();
  CHECK(a["ok"] == true);
  CHECK(a["op"] == "stop");
  CHECK(emu.status(id).phase == Phase::Stopped);
}
