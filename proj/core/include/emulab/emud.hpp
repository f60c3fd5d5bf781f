#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "emulab/bus.hpp"
#include "emulab/calib.hpp"
#include "emulab/channel.hpp"
#include "emulab/configdb.hpp"
#include "emulab/phy/snr.hpp"
#include "emulab/scenario.hpp"

// The orchestrator: one run at a time, one worker per traffic link, one
// supervisor applying control commands and publishing run telemetry.
//
// Topics (all created at load):
//   control.<run>          Control    commands (JSON, see parse_command)
//   telemetry.run.<run>    Telemetry  phase, link summaries, command acks
//   telemetry.calib.<link> Telemetry  calibration state per iteration
//   telemetry.link.<link>  Telemetry  LinkRuntime snapshots
//   feedback.<link>        Feedback   probe SNR reports
//   payload.<link>         Payload    decoded payload bytes
namespace emulab::emud {

enum class Phase { Loaded, Calibrating, Active, Stopped, Error };
std::string_view to_string(Phase p) noexcept;

struct LinkRuntime {
  std::string link_id;
  calib::CalibrationState calib;
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_ok = 0;
  std::uint64_t frames_err = 0;
  std::string current_mcs;
  std::optional<double> last_snr_db;
  double gain_db = 0.0;
  double emulated_s = 0.0;  // traffic time: frames_sent / frame_rate
};

nlohmann::json runtime_json(const LinkRuntime& r);

// ---- per-link signal path ---------------------------------------------------

// Drives one link's frames through tx_chain -> channel -> rx_chain. Not
// thread-safe; owned by the link's worker.
class LinkPipeline {
 public:
  LinkPipeline(std::shared_ptr<const scenario::Scenario> scenario, const scenario::LinkSpec& link,
               channel::Channel& channel, configdb::Store& store, bus::Bus& bus, std::string tx_serial,
               std::string rx_serial);

  // Sends probe_frames probe frames, pools their pilot statistics and
  // publishes the result on feedback.<link>.
  calib::Feedback probe_burst(std::uint64_t burst);

  struct FrameResult {
    bool ok = false;
    std::optional<phy::PilotStats> pilots;
    std::optional<double> snr_db;
    std::string mcs_id;
  };
  FrameResult traffic_frame();

  const std::string& tx_serial() const noexcept { return tx_serial_; }
  const std::string& rx_serial() const noexcept { return rx_serial_; }
  double symbol_rate_hz() const noexcept { return symbol_rate_hz_; }

 private:
  phy::IqBuffer transmit(std::span<const std::uint8_t> payload, std::size_t mcs_index);

  std::shared_ptr<const scenario::Scenario> scenario_;
  const scenario::LinkSpec& link_;
  channel::Channel& channel_;
  configdb::Store& store_;
  bus::Bus& bus_;
  std::string tx_serial_;
  std::string rx_serial_;
  double symbol_rate_hz_;
  std::uint64_t counter_ = 0;
};

// ---- commands ------------------------------------------------------------------

struct Command {
  enum class Op { Stop, SetTargetSnr, ToggleJammer, SetJammerPower, Recalibrate };
  Op op = Op::Stop;
  std::string link_id;
  std::string node_id;
  double value = 0.0;
  bool active = false;
};

std::string_view to_string(Command::Op op) noexcept;
// {"op":"stop"} | {"op":"set_target_snr","link_id":..,"snr_db":..}
// | {"op":"toggle_jammer","node_id":..,"active":bool}
// | {"op":"set_jammer_power","node_id":..,"power_dbm":..}
// | {"op":"recalibrate","link_id":..}
// Throws BadCommand.
Command parse_command(const nlohmann::json& j);
nlohmann::json command_json(const Command& c);

struct Ack {
  std::string run_id;
  std::string op;
  std::uint64_t timestamp_us = 0;
};

// ---- emulator ------------------------------------------------------------------

struct EmulatorOptions {
  std::filesystem::path work_dir = "emulab-runs";
  // Real-time pacing at the scenario frame rate; false runs as fast as
  // possible with deterministic emulated time.
  bool realtime = true;
  std::optional<std::uint64_t> seed_override;
  std::chrono::milliseconds telemetry_period{250};
  bool sync_writes = false;
  // Stop traffic once every link reaches this much emulated time.
  std::optional<double> duration_s;
};

struct RunStatus {
  std::string run_id;
  Phase phase = Phase::Loaded;
  std::string diagnostics;
  std::vector<LinkRuntime> links;
  std::vector<channel::JammerEmitter> jammers;
  std::uint64_t started_at_us = 0;
  std::uint64_t stopped_at_us = 0;
};

nlohmann::json status_json(const RunStatus& s);

class Emulator {
 public:
  Emulator(bus::Bus& bus, EmulatorOptions options);
  ~Emulator();
  Emulator(const Emulator&) = delete;
  Emulator& operator=(const Emulator&) = delete;

  // Validates, creates a fresh configdb under work_dir/<run_id>, assigns
  // serials and ownerships. Throws ValidationFailed (violations available via
  // last_violations()), RunBusy, StorageError.
  std::string load(const scenario::Scenario& scenario);
  const std::vector<scenario::Violation>& last_violations() const noexcept { return violations_; }

  // Launches calibration then traffic on every traffic link. Throws
  // UnknownRun, WrongPhase.
  void start(const std::string& run_id);

  // Applies a command through the supervisor. Throws UnknownRun, UnknownLink,
  // UnknownNode, WrongPhase, BadParams.
  Ack control(const std::string& run_id, const Command& command);

  RunStatus status(const std::string& run_id) const;
  std::optional<std::string> current_run() const;

  // Blocks until every link has finished its current calibration (phase is
  // Active, Stopped or Error) or the timeout elapses.
  bool wait_calibrated(std::chrono::milliseconds timeout);
  // Blocks until the workers have exited (duration reached or stopped).
  bool wait_finished(std::chrono::milliseconds timeout);

  // Stops the current run if any and joins all threads.
  void shutdown();

  configdb::Store* store() const noexcept { return store_.get(); }
  channel::Channel* channel() const noexcept { return channel_.get(); }
  bus::Bus& bus() noexcept { return bus_; }

 private:
  struct LinkTask;

  void worker(LinkTask& task);
  void supervisor();
  void apply(const Command& c);
  void publish_run_snapshot();
  void publish_link(LinkTask& task);
  void publish_calib(const calib::CalibrationState& s);
  void update_phase_locked();
  void fail_run(const std::string& diagnostics);
  LinkTask& task(const std::string& link_id);

  bus::Bus& bus_;
  EmulatorOptions options_;
  std::vector<scenario::Violation> violations_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::string run_id_;
  int run_counter_ = 0;
  Phase phase_ = Phase::Stopped;
  std::string diagnostics_;
  std::uint64_t started_at_us_ = 0;
  std::uint64_t stopped_at_us_ = 0;
  std::shared_ptr<const scenario::Scenario> scenario_;
  std::unique_ptr<configdb::Store> store_;
  std::unique_ptr<channel::Channel> channel_;
  std::vector<std::unique_ptr<LinkTask>> tasks_;
  std::atomic<bool> stopping_{false};

  // Supervisor command queue.
  struct Pending {
    Command command;
    std::optional<Ack> ack;
    std::exception_ptr error;
    bool done = false;
  };
  std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::vector<std::shared_ptr<Pending>> queue_;
  std::thread supervisor_thread_;
  std::atomic<bool> supervisor_stop_{false};
  std::unique_ptr<bus::Subscription> control_sub_;
};

}  // namespace emulab::emud
