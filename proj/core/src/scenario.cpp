#include "emulab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emulab/error.hpp"

namespace emulab::scenario {

using nlohmann::json;

std::string CodeRate::str() const { return std::to_string(num) + "/" + std::to_string(den); }

std::optional<CodeRate> CodeRate::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  try {
    const int n = std::stoi(std::string(text.substr(0, slash)));
    const int d = std::stoi(std::string(text.substr(slash + 1)));
    if (n <= 0 || d <= 0 || n > d) return std::nullopt;
    return CodeRate{n, d};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

int bits_per_symbol(Modulation m) noexcept {
  switch (m) {
    case Modulation::BPSK: return 1;
    case Modulation::QPSK: return 2;
    case Modulation::PSK8: return 3;
  }
  return 0;
}

std::string_view to_string(NodeKind k) noexcept {
  switch (k) {
    case NodeKind::Terminal: return "Terminal";
    case NodeKind::Hub: return "Hub";
    case NodeKind::Jammer: return "Jammer";
    case NodeKind::Transponder: return "Transponder";
  }
  return "?";
}

std::string_view to_string(LinkRole r) noexcept {
  switch (r) {
    case LinkRole::Traffic: return "Traffic";
    case LinkRole::Jamming: return "Jamming";
    case LinkRole::Feedback: return "Feedback";
  }
  return "?";
}

std::string_view to_string(Modulation m) noexcept {
  switch (m) {
    case Modulation::BPSK: return "BPSK";
    case Modulation::QPSK: return "QPSK";
    case Modulation::PSK8: return "8PSK";
  }
  return "?";
}

std::string_view to_string(JammerWaveform w) noexcept {
  switch (w) {
    case JammerWaveform::Tone: return "Tone";
    case JammerWaveform::WidebandNoise: return "WidebandNoise";
  }
  return "?";
}

std::optional<Modulation> parse_modulation(std::string_view text) noexcept {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "bpsk") return Modulation::BPSK;
  if (lower == "qpsk") return Modulation::QPSK;
  if (lower == "8psk" || lower == "psk8") return Modulation::PSK8;
  return std::nullopt;
}

const NodeSpec* Scenario::find_node(std::string_view id) const noexcept {
  for (const auto& n : nodes)
    if (n.node_id == id) return &n;
  return nullptr;
}

const LinkSpec* Scenario::find_link(std::string_view id) const noexcept {
  for (const auto& l : links)
    if (l.link_id == id) return &l;
  return nullptr;
}

const McsProfile* Scenario::find_mcs(std::string_view id) const noexcept {
  for (const auto& m : mcs_table)
    if (m.mcs_id == id) return &m;
  return nullptr;
}

const NodeSpec* Scenario::transponder_node() const noexcept {
  for (const auto& n : nodes)
    if (n.kind == NodeKind::Transponder) return &n;
  return nullptr;
}

std::vector<const LinkSpec*> Scenario::traffic_links() const {
  std::vector<const LinkSpec*> out;
  for (const auto& l : links)
    if (l.role == LinkRole::Traffic) out.push_back(&l);
  return out;
}

std::vector<McsProfile> default_mcs_table() {
  return {
      {"BPSK-1/2", Modulation::BPSK, {1, 2}, -1.0, 1},
      {"QPSK-1/2", Modulation::QPSK, {1, 2}, 2.0, 2},
      {"QPSK-3/4", Modulation::QPSK, {3, 4}, 5.0, 2},
      {"8PSK-2/3", Modulation::PSK8, {2, 3}, 9.0, 3},
      {"8PSK-3/4", Modulation::PSK8, {3, 4}, 11.0, 3},
  };
}

const McsProfile& select_mcs(std::span<const McsProfile> table, double measured_snr_db, double margin_db) {
  if (table.empty()) throw Error(Errc::EmptyTable, "mcs_table");
  const double effective = measured_snr_db - margin_db;
  const McsProfile* best = nullptr;
  for (const auto& p : table) {
    if (p.min_snr_db > effective) continue;
    if (best == nullptr || p.efficiency() >= best->efficiency()) best = &p;
  }
  return best != nullptr ? *best : table.front();
}

// ---------------------------------------------------------------------------
// validation

namespace {

bool finite(double v) { return std::isfinite(v); }

void add(std::vector<Violation>& out, std::string code, std::string subject, std::string message) {
  out.push_back({std::move(code), std::move(subject), std::move(message)});
}

}  // namespace

std::vector<Violation> validate(const Scenario& s) {
  std::vector<Violation> out;

  std::set<std::string> node_ids;
  int transponders = 0;
  for (const auto& n : s.nodes) {
    if (!node_ids.insert(n.node_id).second)
      add(out, "DuplicateNodeId", n.node_id, "node_id '" + n.node_id + "' is used more than once");
    if (n.kind == NodeKind::Transponder) ++transponders;
    if (!finite(n.max_tx_power_dbm))
      add(out, "NonFiniteValue", n.node_id, "max_tx_power_dbm must be finite");
    if (!finite(n.antenna_gain_db))
      add(out, "NonFiniteValue", n.node_id, "antenna_gain_db must be finite");
    if (!std::all_of(n.position.begin(), n.position.end(), finite))
      add(out, "NonFiniteValue", n.node_id, "position must be finite");
  }
  if (transponders != 1)
    add(out, "TransponderCount", std::to_string(transponders),
        "exactly one Transponder node is required, found " + std::to_string(transponders));

  if (s.mcs_table.empty()) {
    add(out, "EmptyMcsTable", "mcs_table", "mcs_table must not be empty");
  } else {
    std::set<std::string> mcs_ids;
    for (std::size_t i = 0; i < s.mcs_table.size(); ++i) {
      const auto& m = s.mcs_table[i];
      if (!mcs_ids.insert(m.mcs_id).second)
        add(out, "DuplicateMcsId", m.mcs_id, "mcs_id '" + m.mcs_id + "' is used more than once");
      if (m.bits_per_symbol != bits_per_symbol(m.modulation))
        add(out, "BitsPerSymbolMismatch", m.mcs_id,
            "bits_per_symbol " + std::to_string(m.bits_per_symbol) + " does not match " +
                std::string(to_string(m.modulation)));
      const bool rate_ok = m.code_rate == CodeRate{1, 2} || m.code_rate == CodeRate{2, 3} || m.code_rate == CodeRate{3, 4};
      if (!rate_ok) add(out, "UnsupportedRate", m.mcs_id, "code_rate " + m.code_rate.str() + " is not one of 1/2, 2/3, 3/4");
      if (i > 0) {
        const auto& prev = s.mcs_table[i - 1];
        if (m.min_snr_db <= prev.min_snr_db)
          add(out, "McsTableNotSorted", m.mcs_id, "min_snr_db must be strictly ascending");
        if (m.efficiency() <= prev.efficiency())
          add(out, "McsNotMonotone", m.mcs_id, "spectral efficiency must increase with min_snr_db");
      }
    }
    if (s.mcs_table.size() > 16)
      add(out, "McsTableTooLarge", "mcs_table", "at most 16 profiles fit the 4-bit header field");
  }

  std::set<std::string> link_ids;
  for (const auto& l : s.links) {
    if (!link_ids.insert(l.link_id).second)
      add(out, "DuplicateLinkId", l.link_id, "link_id '" + l.link_id + "' is used more than once");
    for (const auto* end : {&l.tx_node, &l.rx_node})
      if (node_ids.count(*end) == 0) add(out, "UnknownNode", *end, "link '" + l.link_id + "' references unknown node");
    if (l.tx_node == l.rx_node) add(out, "SelfLink", l.link_id, "tx_node and rx_node must differ");
    if (!(l.carrier_hz > l.bandwidth_hz / 2.0))
      add(out, "CarrierBelowHalfBandwidth", l.link_id, "carrier_hz must exceed bandwidth_hz/2");
    if (l.role == LinkRole::Traffic) {
      if (!l.target_snr_db) add(out, "MissingTargetSnr", l.link_id, "traffic links need target_snr_db");
      else if (!finite(*l.target_snr_db)) add(out, "NonFiniteValue", l.link_id, "target_snr_db must be finite");
      if (s.find_mcs(l.initial_mcs) == nullptr)
        add(out, "UnknownMcs", l.initial_mcs, "link '" + l.link_id + "' references unknown MCS");
    }
    if (l.initial_gain_db && (*l.initial_gain_db < s.frontend.gain_min_db || *l.initial_gain_db > s.frontend.gain_max_db))
      add(out, "GainOutOfBounds", l.link_id, "initial_gain_db outside front-end gain bounds");
  }

  if (s.transponder.uplink_hz != 0.0 && s.transponder.uplink_hz == s.transponder.downlink_hz)
    add(out, "TransponderFrequencies", "transponder", "uplink_hz and downlink_hz must differ");
  if (!finite(s.transponder.gain_db)) add(out, "NonFiniteValue", "transponder", "gain_db must be finite");
  if (!(s.transponder.saturation_amplitude > 0.0))
    add(out, "BadRange", "transponder", "saturation_amplitude must be positive");

  for (const auto& j : s.jammers) {
    const NodeSpec* node = s.find_node(j.node_id);
    if (node == nullptr) {
      add(out, "UnknownNode", j.node_id, "jammer references unknown node");
      continue;
    }
    if (node->kind != NodeKind::Jammer) add(out, "NotAJammer", j.node_id, "jammer emitter must sit on a Jammer node");
    if (j.power_dbm > node->max_tx_power_dbm)
      add(out, "JammerPowerExceedsMax", j.node_id, "jammer power_dbm exceeds the node's max_tx_power_dbm");
    if (j.waveform == JammerWaveform::WidebandNoise && !(j.bandwidth_hz > 0.0))
      add(out, "BadRange", j.node_id, "wideband noise jammer needs bandwidth_hz > 0");
  }

  if (!(s.frontend.gain_min_db < s.frontend.gain_max_db))
    add(out, "BadRange", "frontend", "gain_min_db must be below gain_max_db");
  if (!(s.calibration.tolerance_db > 0.0)) add(out, "BadRange", "calibration", "tolerance_db must be positive");
  if (!(s.calibration.alpha > 0.0 && s.calibration.alpha <= 1.0))
    add(out, "BadRange", "calibration", "alpha must lie in (0, 1]");
  if (s.calibration.max_iters < 1 || s.calibration.probe_frames < 1)
    add(out, "BadRange", "calibration", "max_iters and probe_frames must be positive");
  if (s.phy.sps < 2 || !(s.phy.rolloff > 0.0 && s.phy.rolloff <= 1.0))
    add(out, "BadRange", "phy", "sps must be >= 2 and rolloff in (0, 1]");
  if (s.phy.payload_bytes < 1 || s.phy.payload_bytes > 512 || s.phy.probe_payload_bytes < 1 || s.phy.probe_payload_bytes > 512)
    add(out, "BadRange", "phy", "payload sizes must be within 1..512 bytes");
  if (!(s.phy.frame_rate_hz > 0.0)) add(out, "BadRange", "phy", "frame_rate_hz must be positive");
  return out;
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace {

[[noreturn]] void schema_error(const std::string& field, const std::string& expected) {
  throw Error(Errc::SchemaError, field, "expected " + expected);
}

const json& require(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end()) schema_error(field, "field to be present");
  return *it;
}

double number(const json& v, const char* field) {
  if (!v.is_number()) schema_error(field, "number");
  return v.get<double>();
}

double req_number(const json& obj, const char* field) { return number(require(obj, field), field); }

double positive(const json& obj, const char* field) {
  const double v = req_number(obj, field);
  if (!(v > 0.0) || !std::isfinite(v)) schema_error(field, "finite number > 0");
  return v;
}

std::string req_string(const json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_string()) schema_error(field, "string");
  return v.get<std::string>();
}

template <typename T>
void opt_number(const json& obj, const char* field, T& out) {
  auto it = obj.find(field);
  if (it == obj.end()) return;
  if (!it->is_number()) schema_error(field, "number");
  if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) schema_error(field, "integer");
  }
  out = it->get<T>();
}

template <typename Enum>
Enum enum_field(const json& obj, const char* field, std::initializer_list<std::pair<const char*, Enum>> names) {
  const std::string text = req_string(obj, field);
  for (const auto& [name, value] : names)
    if (text == name) return value;
  std::string expected = "one of";
  for (const auto& [name, value] : names) expected += std::string(" ") + name;
  schema_error(field, expected);
}

const json& object_of(const json& v, const char* field) {
  if (!v.is_object()) schema_error(field, "object");
  return v;
}

const json& array_of(const json& v, const char* field) {
  if (!v.is_array()) schema_error(field, "array");
  return v;
}

NodeSpec parse_node(const json& j) {
  object_of(j, "nodes[]");
  NodeSpec n;
  n.node_id = req_string(j, "node_id");
  n.kind = enum_field<NodeKind>(j, "kind",
                                {{"Terminal", NodeKind::Terminal},
                                 {"Hub", NodeKind::Hub},
                                 {"Jammer", NodeKind::Jammer},
                                 {"Transponder", NodeKind::Transponder}});
  const auto& pos = array_of(require(j, "position"), "position");
  if (pos.size() != 3) schema_error("position", "array of 3 numbers");
  for (std::size_t i = 0; i < 3; ++i) n.position[i] = number(pos[i], "position");
  n.antenna_gain_db = req_number(j, "antenna_gain_db");
  n.max_tx_power_dbm = req_number(j, "max_tx_power_dbm");
  return n;
}

LinkSpec parse_link(const json& j) {
  object_of(j, "links[]");
  LinkSpec l;
  l.link_id = req_string(j, "link_id");
  l.tx_node = req_string(j, "tx_node");
  l.rx_node = req_string(j, "rx_node");
  l.carrier_hz = positive(j, "carrier_hz");
  l.bandwidth_hz = positive(j, "bandwidth_hz");
  l.role = enum_field<LinkRole>(j, "role",
                                {{"Traffic", LinkRole::Traffic}, {"Jamming", LinkRole::Jamming}, {"Feedback", LinkRole::Feedback}});
  if (auto it = j.find("target_snr_db"); it != j.end() && !it->is_null() && l.role != LinkRole::Jamming)
    l.target_snr_db = number(*it, "target_snr_db");
  if (auto it = j.find("initial_mcs"); it != j.end()) {
    if (!it->is_string()) schema_error("initial_mcs", "string");
    l.initial_mcs = it->get<std::string>();
  } else if (l.role == LinkRole::Traffic) {
    schema_error("initial_mcs", "field to be present");
  }
  if (auto it = j.find("path_loss_db"); it != j.end() && !it->is_null()) l.path_loss_db = number(*it, "path_loss_db");
  opt_number(j, "cfo_hz", l.cfo_hz);
  if (auto it = j.find("initial_gain_db"); it != j.end() && !it->is_null())
    l.initial_gain_db = number(*it, "initial_gain_db");
  return l;
}

McsProfile parse_mcs(const json& j) {
  object_of(j, "mcs_table[]");
  McsProfile m;
  m.mcs_id = req_string(j, "mcs_id");
  const auto mod = parse_modulation(req_string(j, "modulation"));
  if (!mod) schema_error("modulation", "one of BPSK QPSK 8PSK");
  m.modulation = *mod;
  const auto rate = CodeRate::parse(req_string(j, "code_rate"));
  if (!rate) schema_error("code_rate", "rational such as \"1/2\"");
  m.code_rate = *rate;
  m.min_snr_db = req_number(j, "min_snr_db");
  const auto& bps = require(j, "bits_per_symbol");
  if (!bps.is_number_integer()) schema_error("bits_per_symbol", "integer");
  m.bits_per_symbol = bps.get<int>();
  return m;
}

JammerSpec parse_jammer(const json& j) {
  object_of(j, "jammers[]");
  JammerSpec js;
  js.node_id = req_string(j, "node_id");
  js.waveform = enum_field<JammerWaveform>(j, "waveform",
                                           {{"Tone", JammerWaveform::Tone}, {"WidebandNoise", JammerWaveform::WidebandNoise}});
  js.power_dbm = req_number(j, "power_dbm");
  js.center_hz = positive(j, "center_hz");
  opt_number(j, "bandwidth_hz", js.bandwidth_hz);
  if (auto it = j.find("active"); it != j.end()) {
    if (!it->is_boolean()) schema_error("active", "boolean");
    js.active = it->get<bool>();
  }
  return js;
}

}  // namespace

void from_json(const json& j, Scenario& s) {
  object_of(j, "scenario");
  s = Scenario{};
  s.name = req_string(j, "name");
  for (const auto& n : array_of(require(j, "nodes"), "nodes")) s.nodes.push_back(parse_node(n));
  for (const auto& l : array_of(require(j, "links"), "links")) s.links.push_back(parse_link(l));
  if (auto it = j.find("mcs_table"); it != j.end()) {
    for (const auto& m : array_of(*it, "mcs_table")) s.mcs_table.push_back(parse_mcs(m));
  } else {
    s.mcs_table = default_mcs_table();
  }
  if (auto it = j.find("noise_floor_dbm_hz"); it != j.end()) {
    s.noise_floor_dbm_hz = it->is_null() ? -std::numeric_limits<double>::infinity() : number(*it, "noise_floor_dbm_hz");
  }
  if (j.contains("sample_rate_hz")) s.sample_rate_hz = positive(j, "sample_rate_hz");
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0))
      schema_error("seed", "non-negative integer");
    s.seed = it->get<std::uint64_t>();
  }

  if (auto it = j.find("transponder"); it != j.end()) {
    const auto& t = object_of(*it, "transponder");
    opt_number(t, "uplink_hz", s.transponder.uplink_hz);
    opt_number(t, "downlink_hz", s.transponder.downlink_hz);
    opt_number(t, "gain_db", s.transponder.gain_db);
    opt_number(t, "saturation_amplitude", s.transponder.saturation_amplitude);
  }
  // Transponder frequencies left at 0 default to the first links into / out of it.
  if (const NodeSpec* xp = s.transponder_node()) {
    for (const auto& l : s.links) {
      if (l.rx_node == xp->node_id && s.transponder.uplink_hz == 0.0) s.transponder.uplink_hz = l.carrier_hz;
      if (l.tx_node == xp->node_id && s.transponder.downlink_hz == 0.0) s.transponder.downlink_hz = l.carrier_hz;
    }
  }
  if (auto it = j.find("jammers"); it != j.end())
    for (const auto& js : array_of(*it, "jammers")) s.jammers.push_back(parse_jammer(js));
  if (auto it = j.find("frontend"); it != j.end()) {
    const auto& f = object_of(*it, "frontend");
    opt_number(f, "gain_min_db", s.frontend.gain_min_db);
    opt_number(f, "gain_max_db", s.frontend.gain_max_db);
  }
  if (auto it = j.find("calibration"); it != j.end()) {
    const auto& c = object_of(*it, "calibration");
    opt_number(c, "tolerance_db", s.calibration.tolerance_db);
    opt_number(c, "alpha", s.calibration.alpha);
    opt_number(c, "max_iters", s.calibration.max_iters);
    opt_number(c, "probe_frames", s.calibration.probe_frames);
    opt_number(c, "margin_db", s.calibration.margin_db);
    opt_number(c, "feedback_timeout_s", s.calibration.feedback_timeout_s);
  }
  if (auto it = j.find("phy"); it != j.end()) {
    const auto& p = object_of(*it, "phy");
    opt_number(p, "sps", s.phy.sps);
    opt_number(p, "rolloff", s.phy.rolloff);
    opt_number(p, "frame_rate_hz", s.phy.frame_rate_hz);
    opt_number(p, "payload_bytes", s.phy.payload_bytes);
    opt_number(p, "probe_payload_bytes", s.phy.probe_payload_bytes);
  }
}

void to_json(json& j, const Scenario& s) {
  j = json::object();
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["noise_floor_dbm_hz"] = std::isinf(s.noise_floor_dbm_hz) ? json(nullptr) : json(s.noise_floor_dbm_hz);
  j["sample_rate_hz"] = s.sample_rate_hz;
  json nodes = json::array();
  for (const auto& n : s.nodes) {
    nodes.push_back({{"node_id", n.node_id},
                     {"kind", to_string(n.kind)},
                     {"position", n.position},
                     {"antenna_gain_db", n.antenna_gain_db},
                     {"max_tx_power_dbm", n.max_tx_power_dbm}});
  }
  j["nodes"] = std::move(nodes);
  json links = json::array();
  for (const auto& l : s.links) {
    json o = {{"link_id", l.link_id},
              {"tx_node", l.tx_node},
              {"rx_node", l.rx_node},
              {"carrier_hz", l.carrier_hz},
              {"bandwidth_hz", l.bandwidth_hz},
              {"role", to_string(l.role)}};
    if (l.target_snr_db) o["target_snr_db"] = *l.target_snr_db;
    if (!l.initial_mcs.empty()) o["initial_mcs"] = l.initial_mcs;
    if (l.path_loss_db) o["path_loss_db"] = *l.path_loss_db;
    if (l.cfo_hz != 0.0) o["cfo_hz"] = l.cfo_hz;
    if (l.initial_gain_db) o["initial_gain_db"] = *l.initial_gain_db;
    links.push_back(std::move(o));
  }
  j["links"] = std::move(links);
  json mcs = json::array();
  for (const auto& m : s.mcs_table) {
    mcs.push_back({{"mcs_id", m.mcs_id},
                   {"modulation", to_string(m.modulation)},
                   {"code_rate", m.code_rate.str()},
                   {"min_snr_db", m.min_snr_db},
                   {"bits_per_symbol", m.bits_per_symbol}});
  }
  j["mcs_table"] = std::move(mcs);
  j["transponder"] = {{"uplink_hz", s.transponder.uplink_hz},
                      {"downlink_hz", s.transponder.downlink_hz},
                      {"gain_db", s.transponder.gain_db},
                      {"saturation_amplitude", s.transponder.saturation_amplitude}};
  json jammers = json::array();
  for (const auto& js : s.jammers) {
    jammers.push_back({{"node_id", js.node_id},
                       {"waveform", to_string(js.waveform)},
                       {"power_dbm", js.power_dbm},
                       {"center_hz", js.center_hz},
                       {"bandwidth_hz", js.bandwidth_hz},
                       {"active", js.active}});
  }
  j["jammers"] = std::move(jammers);
  j["frontend"] = {{"gain_min_db", s.frontend.gain_min_db}, {"gain_max_db", s.frontend.gain_max_db}};
  j["calibration"] = {{"tolerance_db", s.calibration.tolerance_db},
                      {"alpha", s.calibration.alpha},
                      {"max_iters", s.calibration.max_iters},
                      {"probe_frames", s.calibration.probe_frames},
                      {"margin_db", s.calibration.margin_db},
                      {"feedback_timeout_s", s.calibration.feedback_timeout_s}};
  j["phy"] = {{"sps", s.phy.sps},
              {"rolloff", s.phy.rolloff},
              {"frame_rate_hz", s.phy.frame_rate_hz},
              {"payload_bytes", s.phy.payload_bytes},
              {"probe_payload_bytes", s.phy.probe_payload_bytes}};
}

void to_json(json& j, const Violation& v) {
  j = {{"code", v.code}, {"subject", v.subject}, {"message", v.message}};
}

Scenario parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const std::size_t offset = e.byte > 0 ? e.byte - 1 : 0;
    throw SyntaxError(offset, e.what());
  }
  try {
    return doc.get<Scenario>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, "scenario", e.what());
  }
}

std::string serialize_scenario(const Scenario& scenario) {
  json j = scenario;
  return j.dump(2) + "\n";
}

Scenario load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, path.string(), "cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace emulab::scenario
