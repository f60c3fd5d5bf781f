#include "emulab/emud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "emulab/error.hpp"

namespace emulab::emud {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::Loaded: return "Loaded";
    case Phase::Calibrating: return "Calibrating";
    case Phase::Active: return "Active";
    case Phase::Stopped: return "Stopped";
    case Phase::Error: return "Error";
  }
  return "?";
}

std::string_view to_string(Command::Op op) noexcept {
  switch (op) {
    case Command::Op::Stop: return "stop";
    case Command::Op::SetTargetSnr: return "set_target_snr";
    case Command::Op::ToggleJammer: return "toggle_jammer";
    case Command::Op::SetJammerPower: return "set_jammer_power";
    case Command::Op::Recalibrate: return "recalibrate";
  }
  return "?";
}

Command parse_command(const json& j) {
  if (!j.is_object()) throw Error(Errc::BadCommand, "body", "command must be a JSON object");
  const auto field = [&](const char* name) -> const json& {
    auto it = j.find(name);
    if (it == j.end()) throw Error(Errc::BadCommand, name, "missing field");
    return *it;
  };
  const auto text = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_string()) throw Error(Errc::BadCommand, name, "expected string");
    return v.get<std::string>();
  };
  const auto number = [&](const char* name) {
    const auto& v = field(name);
    if (!v.is_number()) throw Error(Errc::BadCommand, name, "expected number");
    return v.get<double>();
  };
  const std::string op = text("op");
  Command c;
  if (op == "stop") {
    c.op = Command::Op::Stop;
  } else if (op == "set_target_snr") {
    c.op = Command::Op::SetTargetSnr;
    c.link_id = text("link_id");
    c.value = number("snr_db");
  } else if (op == "toggle_jammer") {
    c.op = Command::Op::ToggleJammer;
    c.node_id = text("node_id");
    const auto& v = field("active");
    if (!v.is_boolean()) throw Error(Errc::BadCommand, "active", "expected boolean");
    c.active = v.get<bool>();
  } else if (op == "set_jammer_power") {
    c.op = Command::Op::SetJammerPower;
    c.node_id = text("node_id");
    c.value = number("power_dbm");
  } else if (op == "recalibrate") {
    c.op = Command::Op::Recalibrate;
    c.link_id = text("link_id");
  } else {
    throw Error(Errc::BadCommand, op, "unknown op");
  }
  return c;
}

json command_json(const Command& c) {
  json j{{"op", to_string(c.op)}};
  switch (c.op) {
    case Command::Op::Stop: break;
    case Command::Op::SetTargetSnr: j["link_id"] = c.link_id; j["snr_db"] = c.value; break;
    case Command::Op::ToggleJammer: j["node_id"] = c.node_id; j["active"] = c.active; break;
    case Command::Op::SetJammerPower: j["node_id"] = c.node_id; j["power_dbm"] = c.value; break;
    case Command::Op::Recalibrate: j["link_id"] = c.link_id; break;
  }
  return j;
}

json runtime_json(const LinkRuntime& r) {
  return json{{"link_id", r.link_id},
              {"calib", calib::state_json(r.calib)},
              {"frames_sent", r.frames_sent},
              {"frames_ok", r.frames_ok},
              {"frames_err", r.frames_err},
              {"current_mcs", r.current_mcs},
              {"last_snr_db", r.last_snr_db ? json(*r.last_snr_db) : json(nullptr)},
              {"gain_db", r.gain_db},
              {"t", r.emulated_s}};
}

json status_json(const RunStatus& s) {
  json links = json::array();
  for (const auto& l : s.links) links.push_back(runtime_json(l));
  json jammers = json::array();
  for (const auto& j : s.jammers) {
    jammers.push_back({{"node_id", j.node_id},
                       {"waveform", scenario::to_string(j.waveform)},
                       {"power_dbm", j.power_dbm},
                       {"center_hz", j.center_hz},
                       {"bandwidth_hz", j.bandwidth_hz},
                       {"active", j.active}});
  }
  return json{{"v", 1},
              {"type", "run"},
              {"run_id", s.run_id},
              {"phase", to_string(s.phase)},
              {"diagnostics", s.diagnostics},
              {"started_at_us", s.started_at_us},
              {"stopped_at_us", s.stopped_at_us},
              {"links", std::move(links)},
              {"jammers", std::move(jammers)}};
}

// ---- Emulator ------------------------------------------------------------------

struct Emulator::LinkTask {
  const scenario::LinkSpec* link = nullptr;
  std::unique_ptr<LinkPipeline> pipe;
  std::unique_ptr<bus::Subscription> feedback;
  std::thread thread;
  // Guarded by Emulator::mu_.
  LinkRuntime rt;
  double target_snr_db = 0.0;
  bool calibrating = false;
  bool recalibrate = false;
  bool done = false;
};

Emulator::Emulator(bus::Bus& bus, EmulatorOptions options) : bus_(bus), options_(std::move(options)) {}

Emulator::~Emulator() { shutdown(); }

std::optional<std::string> Emulator::current_run() const {
  std::lock_guard lock(mu_);
  if (run_id_.empty()) return std::nullopt;
  return run_id_;
}

std::string Emulator::load(const scenario::Scenario& input) {
  {
    std::lock_guard lock(mu_);
    if (!run_id_.empty() && (phase_ == Phase::Loaded || phase_ == Phase::Calibrating || phase_ == Phase::Active))
      throw Error(Errc::RunBusy, run_id_, "a run is already loaded or active");
  }
  violations_ = scenario::validate(input);
  if (!violations_.empty())
    throw Error(Errc::ValidationFailed, std::to_string(violations_.size()) + " violations", violations_.front().message);
  shutdown();

  auto sc = std::make_shared<scenario::Scenario>(input);
  if (options_.seed_override) sc->seed = *options_.seed_override;

  char id[32];
  std::snprintf(id, sizeof id, "run-%04d", run_counter_ + 1);
  const std::string run_id = id;
  const auto dir = options_.work_dir / run_id;
  std::error_code ec;
  std::filesystem::remove_all(dir, ec);
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::StorageError, dir.string(), ec.message());

  configdb::StoreOptions so;
  so.gain_min_db = sc->frontend.gain_min_db;
  so.gain_max_db = sc->frontend.gain_max_db;
  so.sync_writes = options_.sync_writes;
  auto store = std::make_unique<configdb::Store>(dir / "config.journal", so);

  const auto& lim = sc->frontend;
  int serial = 0;
  std::int64_t tx_id = 0;
  std::int64_t rx_id = 0;
  const auto next_serial = [&] {
    char buf[16];
    std::snprintf(buf, sizeof buf, "SIM-%04d", ++serial);
    return std::string(buf);
  };
  std::vector<std::pair<std::string, std::string>> serials;
  for (const auto& l : sc->links) store->register_link(l.link_id);
  for (const auto* l : sc->traffic_links()) {
    const double gain = l->initial_gain_db.value_or((lim.gain_min_db + lim.gain_max_db) / 2.0);
    configdb::ConfigRecord tx{++tx_id, next_serial(), configdb::Table::Tx, l->carrier_hz, l->bandwidth_hz,
                              l->bandwidth_hz, gain, l->initial_mcs, 0, {{"link_id", l->link_id}, {"node_id", l->tx_node}}};
    configdb::ConfigRecord rx{++rx_id, next_serial(), configdb::Table::Rx, l->carrier_hz, l->bandwidth_hz,
                              l->bandwidth_hz, lim.gain_min_db, l->initial_mcs, 0,
                              {{"link_id", l->link_id}, {"node_id", l->rx_node}}};
    store->upsert(tx);
    store->upsert(rx);
    store->assign(l->link_id, tx.frontend_serial, configdb::Table::Tx);
    store->assign(l->link_id, rx.frontend_serial, configdb::Table::Rx);
    serials.emplace_back(tx.frontend_serial, rx.frontend_serial);
  }
  auto channel = std::make_unique<channel::Channel>(sc, *store);

  bus_.register_topic("control." + run_id, bus::TopicKind::Control);
  bus_.register_topic("telemetry.run." + run_id, bus::TopicKind::Telemetry);
  std::vector<std::unique_ptr<LinkTask>> tasks;
  const auto links = sc->traffic_links();
  for (std::size_t i = 0; i < links.size(); ++i) {
    const auto* l = links[i];
    bus_.register_topic("telemetry.calib." + l->link_id, bus::TopicKind::Telemetry);
    bus_.register_topic("telemetry.link." + l->link_id, bus::TopicKind::Telemetry);
    bus_.register_topic("feedback." + l->link_id, bus::TopicKind::Feedback);
    bus_.register_topic("payload." + l->link_id, bus::TopicKind::Payload);
    auto t = std::make_unique<LinkTask>();
    t->link = l;
    t->pipe = std::make_unique<LinkPipeline>(sc, *l, *channel, *store, bus_, serials[i].first, serials[i].second);
    t->feedback = bus_.subscribe("feedback." + l->link_id, bus::Mode::Latest);
    t->target_snr_db = *l->target_snr_db;
    t->rt.link_id = l->link_id;
    t->rt.current_mcs = l->initial_mcs;
    t->rt.gain_db = store->find(configdb::Table::Tx, serials[i].first)->gain_db;
    t->rt.calib.link_id = l->link_id;
    t->rt.calib.target_snr_db = t->target_snr_db;
    t->rt.calib.gain_db = t->rt.gain_db;
    tasks.push_back(std::move(t));
  }

  {
    std::lock_guard lock(mu_);
    run_id_ = run_id;
    ++run_counter_;
    scenario_ = sc;
    store_ = std::move(store);
    channel_ = std::move(channel);
    tasks_ = std::move(tasks);
    phase_ = Phase::Loaded;
    diagnostics_.clear();
    started_at_us_ = stopped_at_us_ = 0;
    stopping_ = false;
  }
  control_sub_ = bus_.subscribe("control." + run_id, bus::Mode::All);
  supervisor_stop_ = false;
  supervisor_thread_ = std::thread([this] { supervisor(); });
  return run_id;
}

void Emulator::start(const std::string& run_id) {
  {
    std::lock_guard lock(mu_);
    if (run_id != run_id_ || run_id_.empty()) throw Error(Errc::UnknownRun, run_id);
    if (phase_ != Phase::Loaded) throw Error(Errc::WrongPhase, std::string(to_string(phase_)), "start requires Loaded");
    phase_ = Phase::Calibrating;
    started_at_us_ = bus_.now_us();
    for (auto& t : tasks_) t->calibrating = true;
  }
  for (auto& t : tasks_) {
    LinkTask* raw = t.get();
    raw->thread = std::thread([this, raw] { worker(*raw); });
  }
  publish_run_snapshot();
}

Emulator::LinkTask& Emulator::task(const std::string& link_id) {
  for (auto& t : tasks_)
    if (t->link->link_id == link_id) return *t;
  throw Error(Errc::UnknownLink, link_id);
}

void Emulator::update_phase_locked() {
  if (phase_ != Phase::Calibrating) return;
  for (const auto& t : tasks_)
    if (t->calibrating) return;
  phase_ = Phase::Active;
  cv_.notify_all();
}

void Emulator::fail_run(const std::string& diagnostics) {
  {
    std::lock_guard lock(mu_);
    if (phase_ != Phase::Stopped) phase_ = Phase::Error;
    if (!diagnostics_.empty()) diagnostics_ += "; ";
    diagnostics_ += diagnostics;
    cv_.notify_all();
  }
  publish_run_snapshot();
}

void Emulator::publish_calib(const calib::CalibrationState& s) {
  bus_.publish("telemetry.calib." + s.link_id, state_json(s).dump());
}

void Emulator::publish_link(LinkTask& t) {
  json j;
  {
    std::lock_guard lock(mu_);
    j = runtime_json(t.rt);
    j["run_id"] = run_id_;
  }
  j["v"] = 1;
  j["type"] = "link";
  bus_.publish("telemetry.link." + t.link->link_id, j.dump());
}

void Emulator::publish_run_snapshot() {
  std::string id;
  {
    std::lock_guard lock(mu_);
    id = run_id_;
  }
  if (id.empty()) return;
  bus_.publish("telemetry.run." + id, status_json(status(id)).dump());
}

void Emulator::worker(LinkTask& t) {
  const auto& s = *scenario_;
  const auto params = calib::StepParams::from(s);
  const double fps = s.phy.frame_rate_hz;
  const auto tel_frames = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(std::chrono::duration<double>(options_.telemetry_period).count() * fps)));
  const std::string& tx_serial = t.pipe->tx_serial();
  try {
    bool finished = false;
    while (!finished && !stopping_) {
      calib::CalibrationState init;
      {
        std::lock_guard lock(mu_);
        t.calibrating = true;
        init.link_id = t.link->link_id;
        init.target_snr_db = t.target_snr_db;
        init.gain_db = t.rt.gain_db;
        t.rt.calib = init;
      }
      publish_link(t);

      calib::CalibrationDeps deps;
      deps.trigger_probe = [&](std::uint64_t burst) { t.pipe->probe_burst(burst); };
      deps.feedback = t.feedback.get();
      deps.set_gain = [&](double g) { return channel_->set_gain(tx_serial, g); };
      deps.publish = [&](const calib::CalibrationState& st) {
        {
          std::lock_guard lock(mu_);
          t.rt.calib = st;
          t.rt.gain_db = st.gain_db;
        }
        publish_calib(st);
        publish_link(t);
      };
      deps.cancelled = [&] { return stopping_.load(); };
      deps.store = store_.get();
      deps.tx_serial = tx_serial;
      deps.feedback_timeout = std::chrono::milliseconds(static_cast<long>(s.calibration.feedback_timeout_s * 1000.0));
      const auto result = calib::run_calibration(init, params, deps);

      std::string mcs;
      if (result.status == calib::Status::Converged)
        mcs = calib::acm_update(*store_, tx_serial, result.status, *result.measured_snr_db, s.mcs_table,
                                s.calibration.margin_db)
                  .mcs_id;
      {
        std::lock_guard lock(mu_);
        t.rt.calib = result;
        t.rt.gain_db = result.gain_db;
        if (!mcs.empty()) t.rt.current_mcs = mcs;
        t.calibrating = false;
        update_phase_locked();
      }
      publish_link(t);

      // Traffic until stopped, recalibration is requested or the duration ends.
      phy::SnrAccumulator window;
      auto last_publish = Clock::now();
      std::uint64_t sent_at_entry;
      {
        std::lock_guard lock(mu_);
        sent_at_entry = t.rt.frames_sent;
      }
      const auto epoch = Clock::now();
      for (std::uint64_t k = 0;; ++k) {
        {
          std::lock_guard lock(mu_);
          if (stopping_) break;
          if (t.recalibrate) {
            t.recalibrate = false;
            break;
          }
          if (options_.duration_s && t.rt.emulated_s >= *options_.duration_s - 1e-9) {
            finished = true;
            break;
          }
        }
        if (options_.realtime) std::this_thread::sleep_until(epoch + std::chrono::duration<double>(k / fps));

        const auto fr = t.pipe->traffic_frame();
        bool publish = false;
        {
          std::lock_guard lock(mu_);
          if (stopping_) break;  // counters freeze at stop
          auto& rt = t.rt;
          ++rt.frames_sent;
          ++(fr.ok ? rt.frames_ok : rt.frames_err);
          if (fr.snr_db) rt.last_snr_db = fr.snr_db;
          rt.current_mcs = fr.mcs_id;
          rt.emulated_s = static_cast<double>(rt.frames_sent) / fps;
          if (options_.realtime) publish = Clock::now() - last_publish >= options_.telemetry_period;
          else publish = (rt.frames_sent - sent_at_entry) % tel_frames == 0;
        }
        if (fr.pilots) window.add(*fr.pilots);
        if (window.frames() >= 20) {
          if (t.rt.calib.status == calib::Status::Converged) {
            const auto acm = calib::acm_update(*store_, tx_serial, calib::Status::Converged, window.result().snr_db,
                                               s.mcs_table, s.calibration.margin_db);
            std::lock_guard lock(mu_);
            t.rt.current_mcs = acm.mcs_id;
          }
          window = phy::SnrAccumulator{};
        }
        if (publish) {
          publish_link(t);
          last_publish = Clock::now();
        }
      }
    }
  } catch (const std::exception& e) {
    fail_run(t.link->link_id + ": " + e.what());
  }
  {
    std::lock_guard lock(mu_);
    t.calibrating = false;
    t.done = true;
    update_phase_locked();
    const bool all_done = std::all_of(tasks_.begin(), tasks_.end(), [](const auto& x) { return x->done; });
    if (all_done && phase_ == Phase::Active) {
      phase_ = Phase::Stopped;
      stopped_at_us_ = bus_.now_us();
    }
    cv_.notify_all();
  }
  publish_link(t);
}

void Emulator::apply(const Command& c) {
  std::unique_lock lock(mu_);
  const bool live = phase_ == Phase::Calibrating || phase_ == Phase::Active;
  if (c.op == Command::Op::Stop) {
    if (!(live || phase_ == Phase::Loaded))
      throw Error(Errc::WrongPhase, std::string(to_string(phase_)), "run is not running");
    stopping_ = true;
    phase_ = Phase::Stopped;
    stopped_at_us_ = bus_.now_us();
    cv_.notify_all();
    return;
  }
  if (!live) throw Error(Errc::WrongPhase, std::string(to_string(phase_)), "command needs Calibrating or Active");
  switch (c.op) {
    case Command::Op::SetTargetSnr: {
      if (!std::isfinite(c.value)) throw Error(Errc::BadParams, "snr_db", "must be finite");
      auto& t = task(c.link_id);
      t.target_snr_db = c.value;
      t.rt.calib.target_snr_db = c.value;
      break;
    }
    case Command::Op::Recalibrate:
      task(c.link_id).recalibrate = true;
      break;
    case Command::Op::ToggleJammer:
      lock.unlock();
      channel_->set_jammer_active(c.node_id, c.active);
      break;
    case Command::Op::SetJammerPower:
      lock.unlock();
      channel_->set_jammer_power(c.node_id, c.value);
      break;
    case Command::Op::Stop:
      break;
  }
}

Ack Emulator::control(const std::string& run_id, const Command& command) {
  {
    std::lock_guard lock(mu_);
    if (run_id_.empty() || run_id != run_id_) throw Error(Errc::UnknownRun, run_id);
  }
  auto p = std::make_shared<Pending>();
  p->command = command;
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(p);
  }
  queue_cv_.notify_all();
  std::unique_lock lock(queue_mu_);
  queue_cv_.wait(lock, [&] { return p->done; });
  if (p->error) std::rethrow_exception(p->error);
  return *p->ack;
}

void Emulator::supervisor() {
  auto last_snapshot = Clock::now();
  const auto process = [&](const Command& c) {
    apply(c);
    Ack ack{run_id_, std::string(to_string(c.op)), bus_.now_us()};
    // The snapshot is published after the ack is stamped, so its bus
    // timestamp is strictly later.
    publish_run_snapshot();
    last_snapshot = Clock::now();
    return ack;
  };
  while (!supervisor_stop_) {
    std::vector<std::shared_ptr<Pending>> batch;
    {
      std::unique_lock lock(queue_mu_);
      queue_cv_.wait_for(lock, std::chrono::milliseconds(20), [&] { return !queue_.empty() || supervisor_stop_; });
      batch.swap(queue_);
    }
    for (auto& p : batch) {
      try {
        p->ack = process(p->command);
      } catch (...) {
        p->error = std::current_exception();
      }
      {
        std::lock_guard lock(queue_mu_);
        p->done = true;
      }
      queue_cv_.notify_all();
    }
    // Commands published directly on the bus control topic.
    while (auto env = control_sub_->try_next()) {
      json reply{{"v", 1}, {"type", "ack"}, {"run_id", run_id_}};
      try {
        const Command c = parse_command(json::parse(env->text()));
        reply["op"] = to_string(c.op);
        const Ack ack = process(c);
        reply["ok"] = true;
        reply["timestamp_us"] = ack.timestamp_us;
      } catch (const std::exception& e) {
        reply["ok"] = false;
        reply["error"] = e.what();
      }
      bus_.publish("telemetry.run." + run_id_, reply.dump());
    }
    Phase phase;
    {
      std::lock_guard lock(mu_);
      phase = phase_;
    }
    if ((phase == Phase::Calibrating || phase == Phase::Active) && Clock::now() - last_snapshot >= options_.telemetry_period) {
      publish_run_snapshot();
      last_snapshot = Clock::now();
    }
  }
}

RunStatus Emulator::status(const std::string& run_id) const {
  std::shared_ptr<const channel::ChannelState> cs;
  if (channel_) cs = channel_->snapshot();
  std::lock_guard lock(mu_);
  if (run_id_.empty() || run_id != run_id_) throw Error(Errc::UnknownRun, run_id);
  RunStatus s;
  s.run_id = run_id_;
  s.phase = phase_;
  s.diagnostics = diagnostics_;
  s.started_at_us = started_at_us_;
  s.stopped_at_us = stopped_at_us_;
  for (const auto& t : tasks_) s.links.push_back(t->rt);
  if (cs) s.jammers = cs->jammers;
  return s;
}

bool Emulator::wait_calibrated(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return phase_ != Phase::Loaded && phase_ != Phase::Calibrating; });
}

bool Emulator::wait_finished(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] {
    for (const auto& t : tasks_)
      if (!t->done) return false;
    return true;
  });
}

void Emulator::shutdown() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
    if (phase_ == Phase::Loaded || phase_ == Phase::Calibrating || phase_ == Phase::Active) {
      phase_ = Phase::Stopped;
      stopped_at_us_ = bus_.now_us();
    }
    cv_.notify_all();
  }
  for (auto& t : tasks_)
    if (t->thread.joinable()) t->thread.join();
  supervisor_stop_ = true;
  queue_cv_.notify_all();
  if (supervisor_thread_.joinable()) supervisor_thread_.join();
}

}  // namespace emulab::emud
