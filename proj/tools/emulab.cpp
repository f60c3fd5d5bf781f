// emulab: headless front end for the emulation testbed.
//
// Exit codes: 0 ok, 1 I/O, 2 scenario invalid, 3 storage failure, 64 usage.

#include <pthread.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emulab/bus.hpp"
#include "emulab/configdb.hpp"
#include "emulab/emud.hpp"
#include "emulab/error.hpp"
#include "emulab/gateway.hpp"
#include "emulab/phy/ber.hpp"
#include "emulab/phy/codec.hpp"
#include "emulab/scenario.hpp"

namespace {

using namespace emulab;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitStorage = 3;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::SyntaxError:
    case Errc::SchemaError:
    case Errc::ValidationFailed: return kExitInvalid;
    case Errc::StorageError: return kExitStorage;
    default: return kExitIo;
  }
}

std::string num(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("EMULAB_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw UsageError("EMULAB_SEED is not an unsigned integer");
  }
}

std::pair<std::string, int> split_host_port(const std::string& text, int default_port) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) return {text, default_port};
  try {
    return {text.substr(0, colon), std::stoi(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw UsageError("bad address: " + text);
  }
}

void print_violations(const std::vector<scenario::Violation>& vs, bool as_json) {
  if (as_json) {
    json arr = json::array();
    for (const auto& v : vs) arr.push_back({{"code", v.code}, {"subject", v.subject}, {"message", v.message}});
    std::cout << json{{"valid", vs.empty()}, {"violations", arr}}.dump() << "\n";
    return;
  }
  for (const auto& v : vs) std::cout << v.code << " " << v.subject << ": " << v.message << "\n";
}

// ---- validate ------------------------------------------------------------------

struct ValidateArgs {
  std::string file;
  std::string format = "text";
};

int cmd_validate(const ValidateArgs& a) {
  const bool as_json = a.format == "json";
  scenario::Scenario sc;
  try {
    sc = scenario::load_scenario_file(a.file);
  } catch (const Error& e) {
    if (e.code() != Errc::SyntaxError && e.code() != Errc::SchemaError) throw;
    print_violations({{std::string(errc_name(e.code())), e.detail(), e.what()}}, as_json);
    return kExitInvalid;
  }
  const auto vs = scenario::validate(sc);
  if (as_json || !vs.empty()) print_violations(vs, as_json);
  return vs.empty() ? kExitOk : kExitInvalid;
}

// ---- run -------------------------------------------------------------------------

struct RunArgs {
  std::string file;
  std::string until;
  std::optional<double> duration_s;
  std::string csv_dir;
  std::optional<std::uint64_t> seed;
  bool realtime = false;
  std::string work_dir = "emulab-runs";
  std::string format = "text";
};

struct TrafficRow {
  double t;
  std::uint64_t frames_ok;
  std::uint64_t frames_err;
  std::optional<double> snr_db;
  std::string mcs;
};

void write_calib_csv(const std::filesystem::path& path, const calib::CalibrationState& s) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, path.string(), "cannot write");
  out << "iteration,gain_db,snr_db,status\n";
  for (std::size_t i = 0; i < s.history.size(); ++i) {
    const auto& h = s.history[i];
    const auto status = i + 1 == s.history.size() ? calib::to_string(s.status) : calib::to_string(calib::Status::Running);
    out << h.iteration << "," << num(h.gain_db) << "," << num(h.snr_db) << "," << status << "\n";
  }
}

void write_traffic_csv(const std::filesystem::path& path, const std::vector<TrafficRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, path.string(), "cannot write");
  out << "t,frames_ok,frames_err,snr_db,mcs\n";
  for (const auto& r : rows)
    out << num(r.t, 3) << "," << r.frames_ok << "," << r.frames_err << "," << (r.snr_db ? num(*r.snr_db) : "") << ","
        << r.mcs << "\n";
}

int cmd_run(const RunArgs& a) {
  if (!a.until.empty() && a.duration_s) throw UsageError("--until and --duration are exclusive");
  if (!a.until.empty() && a.until != "calibrated") throw UsageError("--until accepts only 'calibrated'");
  if (a.duration_s && !(*a.duration_s >= 0.0)) throw UsageError("--duration must be >= 0");

  scenario::Scenario sc;
  try {
    sc = scenario::load_scenario_file(a.file);
  } catch (const Error& e) {
    if (e.code() != Errc::SyntaxError && e.code() != Errc::SchemaError) throw;
    std::cerr << "emulab: " << e.what() << "\n";
    return kExitInvalid;
  }
  if (const auto vs = scenario::validate(sc); !vs.empty()) {
    print_violations(vs, a.format == "json");
    return kExitInvalid;
  }

  emud::EmulatorOptions eo;
  eo.work_dir = a.work_dir;
  eo.realtime = a.realtime;
  eo.seed_override = a.seed ? a.seed : env_seed();
  eo.duration_s = a.until == "calibrated" ? 0.0 : a.duration_s.value_or(10.0);

  bus::Bus bus;
  emud::Emulator emu(bus, eo);
  const auto run_id = emu.load(sc);
  std::map<std::string, std::unique_ptr<bus::Subscription>> subs;
  for (const auto* l : sc.traffic_links()) subs[l->link_id] = bus.subscribe("telemetry.link." + l->link_id, bus::Mode::All);
  emu.start(run_id);
  emu.wait_finished(std::chrono::hours(24));
  const auto status = emu.status(run_id);
  emu.shutdown();

  std::map<std::string, std::vector<TrafficRow>> traffic;
  for (auto& [link, sub] : subs) {
    std::uint64_t last_sent = 0;
    while (auto env = sub->try_next()) {
      const auto j = json::parse(env->text());
      const auto sent = j.at("frames_sent").get<std::uint64_t>();
      if (sent <= last_sent) continue;
      last_sent = sent;
      const auto& snr = j.at("last_snr_db");
      traffic[link].push_back({j.at("t").get<double>(), j.at("frames_ok").get<std::uint64_t>(),
                               j.at("frames_err").get<std::uint64_t>(),
                               snr.is_null() ? std::nullopt : std::optional<double>(snr.get<double>()),
                               j.at("current_mcs").get<std::string>()});
    }
  }

  if (!a.csv_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(a.csv_dir, ec);
    if (ec) throw Error(Errc::IoError, a.csv_dir, ec.message());
    for (const auto& l : status.links) {
      write_calib_csv(std::filesystem::path(a.csv_dir) / ("calib_" + l.link_id + ".csv"), l.calib);
      write_traffic_csv(std::filesystem::path(a.csv_dir) / ("traffic_" + l.link_id + ".csv"), traffic[l.link_id]);
    }
  }

  if (a.format == "json") {
    std::cout << emud::status_json(status).dump() << "\n";
  } else {
    std::cout << status.run_id << " " << emud::to_string(status.phase) << "\n";
    for (const auto& l : status.links) {
      std::cout << "  " << l.link_id << " " << calib::to_string(l.calib.status) << " iterations=" << l.calib.iteration
                << " gain_db=" << num(l.gain_db, 2)
                << " snr_db=" << (l.calib.measured_snr_db ? num(*l.calib.measured_snr_db, 2) : "-")
                << " mcs=" << l.current_mcs << " frames=" << l.frames_ok << "/" << l.frames_sent << "\n";
    }
    if (!status.diagnostics.empty()) std::cout << "  diagnostics: " << status.diagnostics << "\n";
  }
  if (status.phase == emud::Phase::Error)
    return status.diagnostics.find("StorageError") != std::string::npos ? kExitStorage : kExitIo;
  return kExitOk;
}

// ---- ber -------------------------------------------------------------------------

struct BerArgs {
  std::string mod = "qpsk";
  std::string rate = "uncoded";
  std::string ebn0 = "0:2:10";
  double bits = 1e5;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
};

std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
  } catch (const std::exception&) {
    throw UsageError("bad --ebn0 range: " + text);
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0]) throw UsageError("--ebn0 expects a:step:b");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = parts[0] + i * parts[1];
    if (v > parts[2] + 1e-9) break;
    out.push_back(v);
  }
  return out;
}

int cmd_ber(const BerArgs& a) {
  const auto mod = scenario::parse_modulation(a.mod);
  if (!mod) throw UsageError("unknown modulation: " + a.mod);
  std::optional<scenario::CodeRate> rate;
  if (a.rate != "uncoded" && a.rate != "none") {
    rate = scenario::CodeRate::parse(a.rate);
    if (!rate || !phy::is_supported_rate(*rate)) throw UsageError("bad --rate: " + a.rate);
  }
  if (!(a.bits >= 1.0)) throw UsageError("--bits must be at least 1");
  const auto points = parse_range(a.ebn0);
  const std::uint64_t seed = a.seed ? *a.seed : env_seed().value_or(1);

  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw Error(Errc::IoError, a.out, "cannot write");
  }
  std::ostream& os = a.out.empty() ? std::cout : file;
  json arr = json::array();
  if (a.format == "csv") os << "ebn0_db,bits,errors,ber\n";
  for (double p : points) {
    const auto r = phy::simulate_ber(*mod, rate, p, static_cast<std::uint64_t>(a.bits), seed);
    if (a.format == "csv") {
      char ber[32];
      std::snprintf(ber, sizeof ber, "%.6e", r.ber());
      os << num(p, 2) << "," << r.bits << "," << r.errors << "," << ber << "\n";
    } else {
      arr.push_back({{"ebn0_db", p}, {"bits", r.bits}, {"errors", r.errors}, {"ber", r.ber()}});
    }
  }
  if (a.format == "json") os << arr.dump() << "\n";
  return kExitOk;
}

// ---- db / bus / serve --------------------------------------------------------------

int cmd_db_dump(const std::string& path, const std::string& format) {
  if (!std::filesystem::exists(path)) throw Error(Errc::IoError, path, "no such journal");
  configdb::Store store(path);
  if (format == "json") {
    json tx = json::array(), rx = json::array(), own = json::array();
    for (const auto& r : store.records(configdb::Table::Tx)) tx.push_back(r);
    for (const auto& r : store.records(configdb::Table::Rx)) rx.push_back(r);
    for (const auto& o : store.ownerships()) own.push_back(o);
    std::cout << json{{"revision", store.revision()}, {"links", store.links()}, {"tx", tx}, {"rx", rx}, {"ownership", own}}
                     .dump()
              << "\n";
  } else {
    std::cout << configdb::render_tables(store);
  }
  return kExitOk;
}

int cmd_bus_tap(const std::string& topic, const std::string& connect, long count, const std::string& mode,
                const std::string& format, double timeout_s) {
  const auto [host, port] = split_host_port(connect, 7400);
  bus::TcpClient client(host, static_cast<std::uint16_t>(port));
  client.subscribe(topic, mode == "latest" ? bus::Mode::Latest : bus::Mode::All);
  for (long n = 0; count < 0 || n < count; ++n) {
    auto env = client.receive(std::chrono::milliseconds(static_cast<long long>(timeout_s * 1e3)));
    if (!env) break;
    if (format == "json") {
      std::cout << gateway::envelope_line(*env);
    } else {
      std::cout << env->seq << " " << env->timestamp_us << " " << env->topic << " " << env->text() << "\n";
    }
    std::cout.flush();
  }
  return kExitOk;
}

int cmd_serve(const std::string& work_dir, bool sync_writes) {
  const char* listen = std::getenv("EMULAB_LISTEN");
  const auto [host, port] = split_host_port(listen ? listen : "127.0.0.1:8080", 8080);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  bus::Bus bus;
  std::unique_ptr<bus::TcpServer> bus_server;
  if (const char* bl = std::getenv("EMULAB_BUS_LISTEN")) {
    const auto [bhost, bport] = split_host_port(bl, 7400);
    bus_server = std::make_unique<bus::TcpServer>(bus, bhost, static_cast<std::uint16_t>(bport));
    std::cerr << "bus listening on " << bhost << ":" << bus_server->port() << "\n";
  }
  emud::EmulatorOptions eo;
  eo.work_dir = work_dir;
  eo.realtime = true;
  eo.sync_writes = sync_writes;
  eo.seed_override = env_seed();
  emud::Emulator emu(bus, eo);
  gateway::Gateway gw(emu);
  const int bound = gw.start(host, port);
  std::cerr << "http listening on " << host << ":" << bound << "\n";

  int sig = 0;
  sigwait(&set, &sig);
  gw.stop();
  emu.shutdown();
  if (bus_server) bus_server->stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emulab: SATCOM SDR emulation testbed"};
  app.require_subcommand(1);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check a scenario file");
  validate->add_option("file", va.file)->required();
  validate->add_option("--format", va.format)->check(CLI::IsMember({"text", "json"}));

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a scenario in-process");
  run->add_option("file", ra.file)->required();
  run->add_option("--until", ra.until, "Stop condition: calibrated");
  run->add_option("--duration", ra.duration_s, "Traffic seconds per link (default 10)");
  run->add_option("--csv", ra.csv_dir, "Directory for calib_<link>.csv and traffic_<link>.csv");
  run->add_option("--seed", ra.seed, "Overrides the scenario seed and EMULAB_SEED");
  run->add_flag("--realtime", ra.realtime, "Pace frames at the scenario frame rate");
  run->add_option("--work-dir", ra.work_dir, "Where run journals are written");
  run->add_option("--format", ra.format)->check(CLI::IsMember({"text", "json"}));

  BerArgs ba;
  auto* ber = app.add_subcommand("ber", "Monte-Carlo BER curve as CSV");
  ber->add_option("--mod", ba.mod)->check(CLI::IsMember({"bpsk", "qpsk", "8psk"}));
  ber->add_option("--rate", ba.rate, "1/2, 2/3, 3/4 or uncoded");
  ber->add_option("--ebn0", ba.ebn0, "a:step:b or a single value, in dB");
  ber->add_option("--bits", ba.bits, "Information bits per point");
  ber->add_option("--seed", ba.seed);
  ber->add_option("--out", ba.out, "Write to a file instead of stdout");
  ber->add_option("--format", ba.format)->check(CLI::IsMember({"csv", "json"}));

  auto* db = app.add_subcommand("db", "Config store tools");
  db->require_subcommand(1);
  std::string db_path, db_format = "text";
  auto* dump = db->add_subcommand("dump", "Render the tables of a journal");
  dump->add_option("path", db_path)->required();
  dump->add_option("--format", db_format)->check(CLI::IsMember({"text", "json"}));

  auto* busc = app.add_subcommand("bus", "Bus tools");
  busc->require_subcommand(1);
  std::string tap_topic, tap_connect = "127.0.0.1:7400", tap_mode = "all", tap_format = "text";
  long tap_count = -1;
  double tap_timeout = 3600.0;
  auto* tap = busc->add_subcommand("tap", "Print envelopes from a running bus");
  tap->add_option("topic", tap_topic)->required();
  tap->add_option("--connect", tap_connect, "host:port of the bus listener");
  tap->add_option("--count", tap_count, "Exit after N envelopes");
  tap->add_option("--timeout", tap_timeout, "Exit after this many idle seconds");
  tap->add_option("--mode", tap_mode)->check(CLI::IsMember({"all", "latest"}));
  tap->add_option("--format", tap_format)->check(CLI::IsMember({"text", "json"}));

  std::string serve_dir = "emulab-runs";
  bool serve_sync = false;
  auto* serve = app.add_subcommand("serve", "Run the orchestrator behind the HTTP API (EMULAB_LISTEN)");
  serve->add_option("--work-dir", serve_dir);
  serve->add_flag("--sync-writes", serve_sync, "fsync every configdb write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(va);
    if (*run) return cmd_run(ra);
    if (*ber) return cmd_ber(ba);
    if (*dump) return cmd_db_dump(db_path, db_format);
    if (*tap) return cmd_bus_tap(tap_topic, tap_connect, tap_count, tap_mode, tap_format, tap_timeout);
    if (*serve) return cmd_serve(serve_dir, serve_sync);
  } catch (const UsageError& e) {
    std::cerr << "emulab: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "emulab: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "emulab: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
