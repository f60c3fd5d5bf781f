#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "emulab/error.hpp"
#include "emulab/scenario.hpp"
#include "test_support.hpp"

using namespace emulab;
using namespace emulab::scenario;

namespace {

bool has_code(const std::vector<Violation>& vs, const std::string& code) {
  return std::any_of(vs.begin(), vs.end(), [&](const auto& v) { return v.code == code; });
}

}  // namespace

TEST_CASE("bench scenario validates") { CHECK(validate(test::bench_scenario({}, 2)).empty()); }

TEST_CASE("default table is the published one") {
  const auto t = default_mcs_table();
  REQUIRE(t.size() == 5);
  const std::pair<const char*, double> expect[] = {
      {"BPSK-1/2", -1.0}, {"QPSK-1/2", 2.0}, {"QPSK-3/4", 5.0}, {"8PSK-2/3", 9.0}, {"8PSK-3/4", 11.0}};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(t[i].mcs_id == expect[i].first);
    CHECK(t[i].min_snr_db == expect[i].second);
  }
  CHECK(t[4].efficiency() == doctest::Approx(2.25));
}

TEST_CASE("select_mcs picks the most efficient profile meeting threshold plus margin") {
  const auto t = default_mcs_table();
  CHECK(select_mcs(t, 10.2, 1.0).mcs_id == "8PSK-2/3");
  CHECK(select_mcs(t, 2.3, 0.0).mcs_id == "QPSK-1/2");
  CHECK(select_mcs(t, 2.3, 1.0).mcs_id == "BPSK-1/2");
  CHECK(select_mcs(t, 3.0, 1.0).mcs_id == "QPSK-1/2");  // threshold met exactly
  CHECK(select_mcs(t, 40.0, 1.0).mcs_id == "8PSK-3/4");
  CHECK(select_mcs(t, -30.0, 1.0).mcs_id == "BPSK-1/2");
  CHECK_THROWS_AS(select_mcs(std::vector<McsProfile>{}, 5.0, 1.0), Error);
}

TEST_CASE("validation catches each rule") {
  auto base = test::bench_scenario({}, 2);

  SUBCASE("duplicate node id") {
    base.nodes.push_back(base.nodes[0]);
    const auto vs = validate(base);
    CHECK(vs.size() == 1);
    CHECK(vs[0].code == "DuplicateNodeId");
  }
  SUBCASE("transponder count") {
    base.nodes.erase(base.nodes.begin() + 2);
    CHECK(has_code(validate(base), "TransponderCount"));
  }
  SUBCASE("unknown node and self link") {
    base.links[0].rx_node = "nowhere";
    base.links[1].rx_node = base.links[1].tx_node;
    const auto vs = validate(base);
    CHECK(has_code(vs, "UnknownNode"));
    CHECK(has_code(vs, "SelfLink"));
  }
  SUBCASE("unsorted and non-monotone table") {
    std::swap(base.mcs_table[1], base.mcs_table[2]);
    CHECK(has_code(validate(base), "McsTableNotSorted"));
    base.mcs_table = default_mcs_table();
    base.mcs_table[2].min_snr_db = 1.5;
    base.mcs_table[1].min_snr_db = 1.0;
    base.mcs_table[2].code_rate = {1, 2};
    CHECK(has_code(validate(base), "McsNotMonotone"));
  }
  SUBCASE("table size limited by the header field") {
    base.mcs_table.clear();
    for (int i = 0; i < 17; ++i)
      base.mcs_table.push_back({"m" + std::to_string(i), Modulation::QPSK, {1, 2}, double(i), 2});
    CHECK(has_code(validate(base), "McsTableTooLarge"));
  }
  SUBCASE("missing target, unknown mcs, gain bounds") {
    base.links[0].target_snr_db.reset();
    base.links[1].initial_mcs = "16APSK";
    base.links[1].initial_gain_db = 99.0;
    const auto vs = validate(base);
    CHECK(has_code(vs, "MissingTargetSnr"));
    CHECK(has_code(vs, "UnknownMcs"));
    CHECK(has_code(vs, "GainOutOfBounds"));
  }
  SUBCASE("carrier below half bandwidth") {
    base.links[0].carrier_hz = 1e5;
    CHECK(has_code(validate(base), "CarrierBelowHalfBandwidth"));
  }
  SUBCASE("jammer rules") {
    base.jammers.push_back({"a", JammerWaveform::Tone, 0.0, 2e9, 0.0, true});
    base.jammers.push_back({"jam", JammerWaveform::WidebandNoise, 99.0, 2e9, 0.0, false});
    const auto vs = validate(base);
    CHECK(has_code(vs, "NotAJammer"));
    CHECK(has_code(vs, "JammerPowerExceedsMax"));
    CHECK(has_code(vs, "BadRange"));
  }
  SUBCASE("non-finite values") {
    base.nodes[0].max_tx_power_dbm = std::numeric_limits<double>::quiet_NaN();
    CHECK(has_code(validate(base), "NonFiniteValue"));
  }
}

TEST_CASE("JSON round trip preserves the scenario") {
  auto s = test::bench_scenario({}, 2);
  s.jammers.push_back({"jam", JammerWaveform::WidebandNoise, 20.0, 2e9, 2e5, true});
  s.links[1].cfo_hz = 1250.0;
  s.links[0].initial_gain_db = 12.0;
  const auto text = serialize_scenario(s);
  CHECK(parse_scenario(text) == s);
}

TEST_CASE("noise floor null disables noise") {
  auto j = nlohmann::json::parse(serialize_scenario(test::bench_scenario()));
  j["noise_floor_dbm_hz"] = nullptr;
  const auto s = parse_scenario(j.dump());
  CHECK(std::isinf(s.noise_floor_dbm_hz));
  CHECK(parse_scenario(serialize_scenario(s)) == s);
}

TEST_CASE("malformed input reports syntax and schema errors") {
  try {
    parse_scenario("{\"name\": \"x\", ");
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(e.code() == Errc::SyntaxError);
  }
  try {
    parse_scenario(R"({"name": "x", "nodes": [], "links": 3})");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaError);
    CHECK(e.detail() == "links");
  }
  CHECK_THROWS_AS(parse_scenario(R"({"name":"x","nodes":[],"links":[],"seed":-1})"), Error);
}

TEST_CASE("transponder frequencies default from adjacent links") {
  auto s = test::bench_scenario();
  s.links.push_back({"up", "a", "sat", 14e9, 1e6, 10.0, "QPSK-1/2"});
  s.links.push_back({"down", "sat", "b", 11.7e9, 1e6, 10.0, "QPSK-1/2"});
  const auto parsed = parse_scenario(serialize_scenario(s));
  CHECK(parsed.transponder.uplink_hz == 14e9);
  CHECK(parsed.transponder.downlink_hz == 11.7e9);
}

TEST_CASE("shipped scenarios validate") {
  for (const auto& entry : std::filesystem::directory_iterator(EMULAB_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const auto s = load_scenario_file(entry.path());
    const bool invalid_on_purpose = entry.path().filename().string().rfind("invalid_", 0) == 0;
    CHECK(validate(s).empty() != invalid_on_purpose);
  }
}

TEST_CASE("missing file is an I/O error") {
  try {
    load_scenario_file("/nonexistent/scenario.json");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoError);
  }
}
