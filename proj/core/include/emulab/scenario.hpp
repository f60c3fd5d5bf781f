#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

// Server-layer data model: nodes, links, the ACM table and channel constants
// that together define one emulation.
namespace emulab::scenario {

enum class NodeKind { Terminal, Hub, Jammer, Transponder };
enum class LinkRole { Traffic, Jamming, Feedback };
enum class Modulation { BPSK, QPSK, PSK8 };
enum class JammerWaveform { Tone, WidebandNoise };

using Vec3 = std::array<double, 3>;

struct NodeSpec {
  std::string node_id;
  NodeKind kind = NodeKind::Terminal;
  Vec3 position{0.0, 0.0, 0.0};  // meters
  double antenna_gain_db = 0.0;
  double max_tx_power_dbm = 0.0;

  bool operator==(const NodeSpec&) const = default;
};

struct LinkSpec {
  std::string link_id;
  std::string tx_node;
  std::string rx_node;
  double carrier_hz = 0.0;
  double bandwidth_hz = 0.0;
  std::optional<double> target_snr_db;  // absent for Jamming links
  std::string initial_mcs;
  LinkRole role = LinkRole::Traffic;
  // Optional extras. A fixed attenuation replaces the free-space model (cabled
  // bench links); cfo_hz is a static carrier offset injected by the channel.
  std::optional<double> path_loss_db;
  double cfo_hz = 0.0;
  std::optional<double> initial_gain_db;

  bool operator==(const LinkSpec&) const = default;
};

struct CodeRate {
  int num = 1;
  int den = 2;

  double value() const noexcept { return static_cast<double>(num) / den; }
  std::string str() const;
  static std::optional<CodeRate> parse(std::string_view text);
  bool operator==(const CodeRate&) const = default;
};

struct McsProfile {
  std::string mcs_id;
  Modulation modulation = Modulation::QPSK;
  CodeRate code_rate;
  double min_snr_db = 0.0;
  int bits_per_symbol = 2;

  // Information bits per channel symbol.
  double efficiency() const noexcept { return bits_per_symbol * code_rate.value(); }
  bool operator==(const McsProfile&) const = default;
};

struct TransponderSpec {
  double uplink_hz = 0.0;
  double downlink_hz = 0.0;
  double gain_db = 0.0;
  // Hard clip level as a multiple of the nominal relayed signal amplitude.
  double saturation_amplitude = 10.0;

  bool operator==(const TransponderSpec&) const = default;
};

struct JammerSpec {
  std::string node_id;
  JammerWaveform waveform = JammerWaveform::Tone;
  double power_dbm = 0.0;
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;  // WidebandNoise only
  bool active = false;

  bool operator==(const JammerSpec&) const = default;
};

struct FrontendLimits {
  double gain_min_db = 0.0;
  double gain_max_db = 30.0;

  bool operator==(const FrontendLimits&) const = default;
};

struct CalibrationConfig {
  double tolerance_db = 0.5;
  double alpha = 1.0;
  int max_iters = 15;
  int probe_frames = 20;
  double margin_db = 1.0;
  double feedback_timeout_s = 5.0;

  bool operator==(const CalibrationConfig&) const = default;
};

struct PhyConfig {
  int sps = 4;
  double rolloff = 0.35;
  double frame_rate_hz = 50.0;
  int payload_bytes = 512;
  int probe_payload_bytes = 16;

  bool operator==(const PhyConfig&) const = default;
};

struct Scenario {
  std::string name;
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  std::vector<McsProfile> mcs_table;
  // -inf disables receiver noise (serialized as null).
  double noise_floor_dbm_hz = -174.0;
  double sample_rate_hz = 1e6;
  std::uint64_t seed = 1;
  TransponderSpec transponder;
  std::vector<JammerSpec> jammers;
  FrontendLimits frontend;
  CalibrationConfig calibration;
  PhyConfig phy;

  const NodeSpec* find_node(std::string_view id) const noexcept;
  const LinkSpec* find_link(std::string_view id) const noexcept;
  const McsProfile* find_mcs(std::string_view id) const noexcept;
  const NodeSpec* transponder_node() const noexcept;
  std::vector<const LinkSpec*> traffic_links() const;

  bool operator==(const Scenario&) const = default;
};

struct Violation {
  std::string code;     // e.g. "DuplicateNodeId"
  std::string subject;  // the offending id or field
  std::string message;

  bool operator==(const Violation&) const = default;
};

std::vector<Violation> validate(const Scenario& scenario);

Scenario parse_scenario(std::string_view text);
std::string serialize_scenario(const Scenario& scenario);
Scenario load_scenario_file(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Scenario& s);
void from_json(const nlohmann::json& j, Scenario& s);
void to_json(nlohmann::json& j, const Violation& v);

// ACM: most spectrally efficient profile whose threshold is met with margin;
// the first (most robust) profile when none qualifies.
const McsProfile& select_mcs(std::span<const McsProfile> table, double measured_snr_db, double margin_db);

std::vector<McsProfile> default_mcs_table();

int bits_per_symbol(Modulation m) noexcept;
std::string_view to_string(NodeKind k) noexcept;
std::string_view to_string(LinkRole r) noexcept;
std::string_view to_string(Modulation m) noexcept;
std::string_view to_string(JammerWaveform w) noexcept;
std::optional<Modulation> parse_modulation(std::string_view text) noexcept;

}  // namespace emulab::scenario
