#include "emulab/calib.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "emulab/error.hpp"

namespace emulab::calib {

using nlohmann::json;

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::Running: return "Running";
    case Status::Converged: return "Converged";
    case Status::Failed: return "Failed";
    case Status::Clipped: return "Clipped";
  }
  return "?";
}

std::optional<Status> parse_status(std::string_view text) noexcept {
  for (Status s : {Status::Running, Status::Converged, Status::Failed, Status::Clipped})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

StepParams StepParams::from(const scenario::Scenario& s) {
  return {s.calibration.tolerance_db, s.calibration.alpha, s.calibration.max_iters, s.frontend.gain_min_db,
          s.frontend.gain_max_db};
}

CalibrationState calibration_step(const CalibrationState& state, const StepParams& p) {
  if (state.status != Status::Running) throw Error(Errc::NotRunning, state.link_id, std::string(to_string(state.status)));
  if (!state.measured_snr_db) throw Error(Errc::BadParams, "measured_snr_db", "no measurement to act on");

  CalibrationState next = state;
  const double measured = *state.measured_snr_db;
  const double error = state.target_snr_db - measured;
  ++next.iteration;
  next.history.push_back({next.iteration, state.gain_db, measured});

  if (std::abs(error) <= p.tolerance_db) {
    next.status = Status::Converged;
    next.clamp_streak = 0;
    return next;
  }
  const double wanted = state.gain_db + p.alpha * error;
  const double applied = std::clamp(wanted, p.gain_min_db, p.gain_max_db);
  next.gain_db = applied;
  next.clamp_streak = applied != wanted ? state.clamp_streak + 1 : 0;
  if (next.clamp_streak >= 2) {
    next.status = Status::Clipped;
  } else if (next.iteration >= p.max_iters) {
    next.status = Status::Failed;
    next.reason = "MaxIterations";
  }
  return next;
}

std::string encode_feedback(const Feedback& f) {
  return json{{"v", 1}, {"burst", f.burst}, {"snr_db", f.snr_db}, {"n_symbols", f.n_symbols}, {"frames", f.frames}}
      .dump();
}

Feedback decode_feedback(std::string_view text) {
  try {
    const json j = json::parse(text);
    Feedback f;
    f.burst = j.at("burst").get<std::uint64_t>();
    f.snr_db = j.at("snr_db").get<double>();
    f.n_symbols = j.value("n_symbols", std::size_t{0});
    f.frames = j.value("frames", 0);
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::BadParams, "feedback", e.what());
  }
}

json state_json(const CalibrationState& s) {
  json history = json::array();
  for (const auto& h : s.history) history.push_back({{"iteration", h.iteration}, {"gain_db", h.gain_db}, {"snr_db", h.snr_db}});
  json j{{"v", 1},
         {"type", "calib"},
         {"link_id", s.link_id},
         {"iteration", s.iteration},
         {"gain_db", s.gain_db},
         {"measured_snr_db", s.measured_snr_db ? json(*s.measured_snr_db) : json(nullptr)},
         {"target_snr_db", s.target_snr_db},
         {"status", to_string(s.status)},
         {"history", std::move(history)}};
  if (!s.reason.empty()) j["reason"] = s.reason;
  return j;
}

CalibrationState run_calibration(CalibrationState state, const StepParams& params, const CalibrationDeps& deps) {
  if (deps.store != nullptr) {
    const auto owner = deps.store->lookup(deps.tx_serial, configdb::Table::Tx);
    if (!owner || *owner != state.link_id) throw Error(Errc::NotOwned, state.link_id, deps.tx_serial + " does not own the link");
  }
  const auto publish = [&](const CalibrationState& s) {
    if (deps.publish) deps.publish(s);
  };

  state.status = Status::Running;
  state.reason.clear();
  state.gain_db = deps.set_gain(state.gain_db);
  std::uint64_t burst = 0;
  while (state.status == Status::Running) {
    if (deps.cancelled && deps.cancelled()) {
      state.status = Status::Failed;
      state.reason = "Cancelled";
      break;
    }
    deps.trigger_probe(++burst);
    std::optional<Feedback> fb;
    const auto deadline = std::chrono::steady_clock::now() + deps.feedback_timeout;
    while (!fb) {
      const auto left = std::chrono::duration_cast<std::chrono::microseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) break;
      auto env = deps.feedback->next(left);
      if (!env) break;
      Feedback f = decode_feedback(env->text());
      if (f.burst == burst) fb = f;  // older bursts are stale
    }
    if (!fb) {
      state.status = Status::Failed;
      state.reason = "Timeout";
      break;
    }
    state.measured_snr_db = fb->snr_db;
    const double before = state.gain_db;
    state = calibration_step(state, params);
    if (state.gain_db != before) state.gain_db = deps.set_gain(state.gain_db);
    publish(state);
  }
  publish(state);
  return state;
}

AcmResult acm_update(configdb::Store& store, const std::string& tx_serial, Status status, double measured_snr_db,
                     std::span<const scenario::McsProfile> table, double margin_db) {
  if (status != Status::Converged) throw Error(Errc::NotConverged, tx_serial, std::string(to_string(status)));
  const auto& mcs = scenario::select_mcs(table, measured_snr_db, margin_db);
  auto rec = store.find(configdb::Table::Tx, tx_serial);
  if (!rec) throw Error(Errc::UnknownFrontend, tx_serial);
  if (rec->mcs_id == mcs.mcs_id) return {mcs.mcs_id, false};
  rec->mcs_id = mcs.mcs_id;
  store.upsert(*rec);
  return {mcs.mcs_id, true};
}

}  // namespace emulab::calib
