#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "emulab/bus.hpp"
#include "emulab/configdb.hpp"
#include "emulab/scenario.hpp"

// Closed-loop link calibration: step the transmit gain until the fed-back SNR
// sits within tolerance of the target, then pick the MCS from the table.
namespace emulab::calib {

enum class Status { Running, Converged, Failed, Clipped };

std::string_view to_string(Status s) noexcept;
std::optional<Status> parse_status(std::string_view text) noexcept;

struct HistoryEntry {
  int iteration = 0;  // 1-based
  double gain_db = 0.0;
  double snr_db = 0.0;

  bool operator==(const HistoryEntry&) const = default;
};

struct CalibrationState {
  std::string link_id;
  int iteration = 0;
  double gain_db = 0.0;
  std::optional<double> measured_snr_db;
  double target_snr_db = 0.0;
  Status status = Status::Running;
  std::vector<HistoryEntry> history;
  int clamp_streak = 0;
  std::string reason;  // set on Failed: "MaxIterations" or "Timeout"

  bool operator==(const CalibrationState&) const = default;
};

struct StepParams {
  double tolerance_db = 0.5;
  double alpha = 1.0;
  int max_iters = 15;
  double gain_min_db = 0.0;
  double gain_max_db = 30.0;

  static StepParams from(const scenario::Scenario& s);
};

// One iteration of the proportional dB-domain law. Records the measurement
// in the history, then either declares convergence (gain unchanged) or moves
// the gain by alpha * (target - measured), clamped to the front-end bounds.
// Two consecutive clamped steps end in Clipped; reaching max_iters in Failed.
// Throws NotRunning unless status is Running, BadParams without a measurement.
CalibrationState calibration_step(const CalibrationState& state, const StepParams& params);

// SNR feedback message carried on feedback.<link>.
struct Feedback {
  std::uint64_t burst = 0;
  double snr_db = 0.0;
  std::size_t n_symbols = 0;
  int frames = 0;
};

std::string encode_feedback(const Feedback& f);
Feedback decode_feedback(std::string_view text);

// Telemetry JSON for a calibration snapshot (schema version 1).
nlohmann::json state_json(const CalibrationState& s);

struct CalibrationDeps {
  // Sends one probe burst tagged with `burst`.
  std::function<void(std::uint64_t burst)> trigger_probe;
  // Latest-mode subscription to the link's feedback topic.
  bus::Subscription* feedback = nullptr;
  // Applies a gain and returns the value actually set.
  std::function<double(double)> set_gain;
  // Called after every step, and once more with the terminal state.
  std::function<void(const CalibrationState&)> publish;
  // Optional: aborts the loop (treated as Failed with reason "Cancelled").
  std::function<bool()> cancelled;
  // Optional ownership check: tx_serial must own the link in the Tx table.
  const configdb::Store* store = nullptr;
  std::string tx_serial;
  std::chrono::milliseconds feedback_timeout{5000};
};

// Runs the loop to a terminal status. `initial` carries link id, target and
// starting gain. Throws NotOwned when the ownership check fails.
CalibrationState run_calibration(CalibrationState initial, const StepParams& params, const CalibrationDeps& deps);

struct AcmResult {
  std::string mcs_id;
  bool written = false;
};

// Selects the MCS for `measured_snr_db` and writes it to the Tx record of
// `tx_serial` when it differs from the current one. Throws NotConverged
// unless `status` is Converged.
AcmResult acm_update(configdb::Store& store, const std::string& tx_serial, Status status, double measured_snr_db,
                     std::span<const scenario::McsProfile> table, double margin_db);

}  // namespace emulab::calib
