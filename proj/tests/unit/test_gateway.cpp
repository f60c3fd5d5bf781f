#include <doctest.h>
#include <httplib.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "emulab/gateway.hpp"
#include "test_support.hpp"

using namespace emulab;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

struct Server {
  test::TempDir dir;
  bus::Bus bus;
  emud::Emulator emu;
  gateway::Gateway gw;
  int port;
  httplib::Client client;

  Server()
      : emu(bus, [this] {
          emud::EmulatorOptions o;
          o.work_dir = dir.path();
          o.telemetry_period = 100ms;
          return o;
        }()),
        gw(emu),
        port(gw.start("127.0.0.1", 0)),
        client("127.0.0.1", port) {
    client.set_read_timeout(10, 0);
  }
  ~Server() {
    gw.stop();
    emu.shutdown();
  }

  json post(const std::string& path, const std::string& body, int expect) {
    auto r = client.Post(path, body, "application/json");
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
  }
  json get(const std::string& path, int expect) {
    auto r = client.Get(path);
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
  }
};

std::string bench_json() { return scenario::serialize_scenario(test::bench_scenario()); }

}  // namespace

TEST_CASE("envelope lines embed JSON payloads") {
  const bus::Envelope a{"t.x", 3, 17, bus::to_bytes(R"({"k":1})")};
  const auto ja = json::parse(gateway::envelope_line(a));
  CHECK(ja["topic"] == "t.x");
  CHECK(ja["seq"] == 3);
  CHECK(ja["timestamp_us"] == 17);
  CHECK(ja["payload"]["k"] == 1);
  CHECK(gateway::envelope_line(a).back() == '\n');
  const bus::Envelope b{"t.y", 1, 1, bus::to_bytes("plain")};
  CHECK(json::parse(gateway::envelope_line(b))["payload"] == "plain");
}

TEST_CASE("run lifecycle over HTTP") {
  Server s;
  CHECK(s.get("/health", 200)["ok"] == true);
  const auto created = s.post("/runs", bench_json(), 201);
  const std::string id = created["run_id"];
  CHECK(s.get("/runs/" + id, 200)["phase"] == "Loaded");
  CHECK(s.post("/runs", bench_json(), 409)["error"] == "RunBusy");
  CHECK(s.get("/runs/run-9999", 404)["error"] == "UnknownRun");

  const auto started = s.post("/runs/" + id + "/start", "", 200);
  CHECK(started["phase"] == "Calibrating");
  CHECK(s.post("/runs/" + id + "/start", "", 409)["error"] == "WrongPhase");
  REQUIRE(s.emu.wait_calibrated(30s));
  CHECK(s.get("/runs/" + id, 200)["phase"] == "Active");

  CHECK(s.post("/runs/" + id + "/control", R"({"op":"warp"})", 400)["error"] == "BadCommand");
  CHECK(s.post("/runs/" + id + "/control", "{", 400)["error"] == "BadCommand");
  CHECK(s.post("/runs/" + id + "/control", R"({"op":"recalibrate","link_id":"zz"})", 404)["error"] == "UnknownLink");
  CHECK(s.post("/runs/run-9999/control", R"({"op":"stop"})", 404)["error"] == "UnknownRun");
  const auto ack = s.post("/runs/" + id + "/control", R"({"op":"set_target_snr","link_id":"ab","snr_db":8})", 200);
  CHECK(ack["op"] == "set_target_snr");
  CHECK(ack["timestamp_us"].get<std::uint64_t>() > 0);
  CHECK(s.post("/runs/" + id + "/control", R"({"op":"stop"})", 200)["op"] == "stop");
  CHECK(s.get("/runs/" + id, 200)["phase"] == "Stopped");
}

TEST_CASE("scenario errors") {
  Server s;
  CHECK(s.post("/runs", "{not json", 400)["error"] == "SyntaxError");
  auto bad = test::bench_scenario();
  bad.links[0].rx_node = "ghost";
  const auto v = s.post("/runs", scenario::serialize_scenario(bad), 422);
  CHECK(v["error"] == "ValidationFailed");
  REQUIRE(v["violations"].size() >= 1);
  CHECK(v["violations"][0].contains("code"));
  CHECK(v["violations"][0].contains("subject"));
}

TEST_CASE("telemetry streams NDJSON starting with a snapshot") {
  Server s;
  const std::string id = s.post("/runs", bench_json(), 201)["run_id"];
  s.post("/runs/" + id + "/start", "", 200);
  std::string body;
  auto r = s.client.Get("/runs/" + id + "/telemetry?limit=5&timeout_s=10",
                        [&](const char* data, std::size_t n) {
                          body.append(data, n);
                          return true;
                        });
  REQUIRE(r);
  CHECK(r->status == 200);
  std::istringstream in(body);
  std::vector<json> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(json::parse(line));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0]["topic"] == "telemetry.run." + id);
  CHECK(lines[0]["payload"]["type"] == "run");
  for (const auto& l : lines) CHECK(l["topic"].get<std::string>().rfind("telemetry.", 0) == 0);
  CHECK(s.get("/runs/run-9999/telemetry", 404)["error"] == "UnknownRun");
}

TEST_CASE("bind failures are reported") {
  Server s;
  test::TempDir dir;
  bus::Bus bus;
  emud::Emulator emu(bus, {});
  gateway::Gateway other(emu);
  CHECK(test::errc_of([&] { other.start("127.0.0.1", s.port); }) == Errc::IoError);
}
