#include "emulab/configdb.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emulab/error.hpp"

namespace emulab::configdb {

using nlohmann::json;

namespace {

constexpr const char* kSnapshotFormat = "emulab-configdb-snapshot";
constexpr int kSnapshotVersion = 1;

[[noreturn]] void storage_error(const std::filesystem::path& path, const std::string& what) {
  throw Error(Errc::StorageError, path.string(), what);
}

std::string errno_text() { return std::strerror(errno); }

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_error(path, "write failed: " + errno_text());
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string_view to_string(Table t) noexcept { return t == Table::Tx ? "Tx" : "Rx"; }

std::optional<Table> parse_table(std::string_view text) noexcept {
  if (text == "Tx") return Table::Tx;
  if (text == "Rx") return Table::Rx;
  return std::nullopt;
}

void to_json(json& j, const ConfigRecord& r) {
  j = json{{"id", r.id},
           {"table", to_string(r.table)},
           {"frontend_serial", r.frontend_serial},
           {"carrier_hz", r.carrier_hz},
           {"bandwidth_hz", r.bandwidth_hz},
           {"sample_rate_hz", r.sample_rate_hz},
           {"gain_db", r.gain_db},
           {"mcs_id", r.mcs_id},
           {"updated_at", r.updated_at},
           {"extras", r.extras}};
}

void from_json(const json& j, ConfigRecord& r) {
  j.at("id").get_to(r.id);
  const auto table = parse_table(j.at("table").get<std::string>());
  if (!table) throw Error(Errc::InvariantViolation, "table", "table must be Tx or Rx");
  r.table = *table;
  j.at("frontend_serial").get_to(r.frontend_serial);
  j.at("carrier_hz").get_to(r.carrier_hz);
  j.at("bandwidth_hz").get_to(r.bandwidth_hz);
  j.at("sample_rate_hz").get_to(r.sample_rate_hz);
  j.at("gain_db").get_to(r.gain_db);
  r.mcs_id = j.value("mcs_id", std::string{});
  r.updated_at = j.value("updated_at", std::uint64_t{0});
  r.extras = j.value("extras", std::map<std::string, std::string>{});
}

void to_json(json& j, const OwnershipRecord& r) {
  j = json{{"link_id", r.link_id}, {"frontend_serial", r.frontend_serial}, {"direction", to_string(r.direction)}};
}

void from_json(const json& j, OwnershipRecord& r) {
  j.at("link_id").get_to(r.link_id);
  j.at("frontend_serial").get_to(r.frontend_serial);
  const auto dir = parse_table(j.at("direction").get<std::string>());
  if (!dir) throw Error(Errc::InvariantViolation, "direction", "direction must be Tx or Rx");
  r.direction = *dir;
}

// ---- Watch -----------------------------------------------------------------

std::optional<ConfigRecord> Watch::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(state_->mu);
  state_->cv.wait_for(lock, timeout, [&] { return !state_->items.empty() || state_->failed; });
  if (state_->items.empty()) return std::nullopt;
  ConfigRecord r = std::move(state_->items.front());
  state_->items.pop_front();
  return r;
}

std::optional<ConfigRecord> Watch::try_next() { return next(std::chrono::milliseconds(0)); }

bool Watch::failed() const {
  std::lock_guard lock(state_->mu);
  return state_->failed;
}

// ---- Store -----------------------------------------------------------------

Store::Store(std::filesystem::path path, StoreOptions options)
    : path_(std::move(path)), snapshot_path_(path_.string() + ".snap"), options_(options) {
  if (path_.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path_.parent_path(), ec);
  }
  replay();
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) storage_error(path_, "cannot open journal: " + errno_text());
}

Store::~Store() {
  if (fd_ >= 0) ::close(fd_);
}

void Store::replay() {
  std::uint64_t base = 0;
  if (std::filesystem::exists(snapshot_path_)) {
    std::ifstream in(snapshot_path_);
    json snap;
    try {
      snap = json::parse(in);
      if (snap.at("format") != kSnapshotFormat || snap.at("version") != kSnapshotVersion)
        storage_error(snapshot_path_, "unrecognised snapshot header");
      base = snap.at("revision").get<std::uint64_t>();
      for (const auto& l : snap.at("links")) links_.insert(l.get<std::string>());
      for (const char* t : {"tx", "rx"}) {
        for (const auto& jr : snap.at(t)) {
          auto r = jr.get<ConfigRecord>();
          tables_[static_cast<int>(r.table)][r.id] = r;
        }
      }
      for (const auto& jo : snap.at("ownership")) {
        auto o = jo.get<OwnershipRecord>();
        owners_[{o.direction, o.frontend_serial}] = o;
      }
    } catch (const json::exception& e) {
      storage_error(snapshot_path_, std::string("corrupt snapshot: ") + e.what());
    }
  }
  revision_ = base;

  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  std::size_t good_end = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail
    const std::string_view line(data.data() + pos, nl - pos);
    json entry;
    try {
      entry = json::parse(line);
    } catch (const json::exception&) {
      storage_error(path_, "corrupt journal entry at byte " + std::to_string(pos));
    }
    const auto rev = entry.value("rev", std::uint64_t{0});
    if (rev > base) {
      if (rev != revision_ + 1) storage_error(path_, "revision gap at byte " + std::to_string(pos));
      try {
        apply(entry);
      } catch (const std::exception& e) {
        storage_error(path_, std::string("bad journal entry: ") + e.what());
      }
      revision_ = rev;
    }
    ++journal_entries_;
    pos = nl + 1;
    good_end = pos;
  }
  if (good_end < data.size()) {
    if (::truncate(path_.c_str(), static_cast<off_t>(good_end)) != 0)
      storage_error(path_, "cannot truncate torn tail: " + errno_text());
  }
}

void Store::apply(const json& entry) {
  const auto& op = entry.at("op").get_ref<const std::string&>();
  if (op == "upsert") {
    auto r = entry.at("record").get<ConfigRecord>();
    tables_[static_cast<int>(r.table)][r.id] = r;
  } else if (op == "link") {
    links_.insert(entry.at("link_id").get<std::string>());
  } else if (op == "assign") {
    auto o = entry.at("ownership").get<OwnershipRecord>();
    owners_[{o.direction, o.frontend_serial}] = o;
  } else {
    throw Error(Errc::StorageError, op, "unknown journal op");
  }
}

void Store::append(const json& entry) {
  if (failed_) storage_error(path_, "store has failed");
  try {
    write_all(fd_, entry.dump() + "\n", path_);
    if (options_.sync_writes && ::fsync(fd_) != 0) storage_error(path_, "fsync failed: " + errno_text());
  } catch (const Error&) {
    failed_ = true;
    fail_watchers();
    throw;
  }
  ++journal_entries_;
}

void Store::check(const ConfigRecord& r) const {
  if (r.id < 1) throw Error(Errc::InvariantViolation, "id", "id must be >= 1");
  if (r.frontend_serial.empty()) throw Error(Errc::InvariantViolation, "frontend_serial", "serial is empty");
  if (!std::isfinite(r.gain_db) || r.gain_db < options_.gain_min_db || r.gain_db > options_.gain_max_db)
    throw Error(Errc::InvariantViolation, "gain_db", "gain outside front-end bounds");
  if (!std::isfinite(r.carrier_hz) || r.carrier_hz < 0.0)
    throw Error(Errc::InvariantViolation, "carrier_hz", "carrier must be finite and non-negative");
  if (!std::isfinite(r.bandwidth_hz) || r.bandwidth_hz < 0.0)
    throw Error(Errc::InvariantViolation, "bandwidth_hz", "bandwidth must be finite and non-negative");
  if (!std::isfinite(r.sample_rate_hz) || r.sample_rate_hz < 0.0)
    throw Error(Errc::InvariantViolation, "sample_rate_hz", "sample rate must be finite and non-negative");
  for (const auto& [id, other] : tables_[static_cast<int>(r.table)]) {
    if (id != r.id && other.frontend_serial == r.frontend_serial)
      throw Error(Errc::InvariantViolation, "frontend_serial", "serial already used by id " + std::to_string(id));
  }
}

std::uint64_t Store::upsert(const ConfigRecord& record) {
  std::unique_lock lock(mu_);
  check(record);
  ConfigRecord r = record;
  r.updated_at = revision_ + 1;
  append(json{{"rev", r.updated_at}, {"op", "upsert"}, {"record", r}});
  revision_ = r.updated_at;
  tables_[static_cast<int>(r.table)][r.id] = r;
  notify(r);
  if (journal_entries_ > options_.compact_threshold) compact_locked();
  return revision_;
}

void Store::register_link(const std::string& link_id) {
  std::unique_lock lock(mu_);
  if (links_.count(link_id)) return;
  append(json{{"rev", revision_ + 1}, {"op", "link"}, {"link_id", link_id}});
  ++revision_;
  links_.insert(link_id);
}

OwnershipRecord Store::assign(const std::string& link_id, const std::string& frontend_serial, Table direction) {
  std::unique_lock lock(mu_);
  const Key key{direction, frontend_serial};
  if (auto it = owners_.find(key); it != owners_.end())
    throw Error(Errc::AlreadyOwned, it->second.link_id, frontend_serial + " is already owned");
  if (!links_.count(link_id)) throw Error(Errc::UnknownLink, link_id, "link is not registered");
  OwnershipRecord o{link_id, frontend_serial, direction};
  append(json{{"rev", revision_ + 1}, {"op", "assign"}, {"ownership", o}});
  ++revision_;
  owners_[key] = o;
  return o;
}

std::optional<ConfigRecord> Store::get(Table table, std::int64_t id) const {
  std::shared_lock lock(mu_);
  const auto& t = tables_[static_cast<int>(table)];
  if (auto it = t.find(id); it != t.end()) return it->second;
  return std::nullopt;
}

std::optional<ConfigRecord> Store::find(Table table, std::string_view serial) const {
  std::shared_lock lock(mu_);
  for (const auto& [id, r] : tables_[static_cast<int>(table)])
    if (r.frontend_serial == serial) return r;
  return std::nullopt;
}

std::vector<ConfigRecord> Store::records(Table table) const {
  std::shared_lock lock(mu_);
  std::vector<ConfigRecord> out;
  for (const auto& [id, r] : tables_[static_cast<int>(table)]) out.push_back(r);
  return out;
}

std::vector<OwnershipRecord> Store::ownerships() const {
  std::shared_lock lock(mu_);
  std::vector<OwnershipRecord> out;
  for (const auto& [k, o] : owners_) out.push_back(o);
  return out;
}

std::vector<std::string> Store::links() const {
  std::shared_lock lock(mu_);
  return {links_.begin(), links_.end()};
}

std::optional<std::string> Store::lookup(std::string_view serial, Table direction) const {
  std::shared_lock lock(mu_);
  if (auto it = owners_.find({direction, std::string(serial)}); it != owners_.end()) return it->second.link_id;
  return std::nullopt;
}

std::optional<std::string> Store::owner(std::string_view link_id, Table direction) const {
  std::shared_lock lock(mu_);
  for (const auto& [k, o] : owners_)
    if (o.link_id == link_id && o.direction == direction) return o.frontend_serial;
  return std::nullopt;
}

Watch Store::watch(Table table, const std::string& serial) {
  auto state = std::make_shared<Watch::State>();
  std::shared_lock lock(mu_);
  for (const auto& [id, r] : tables_[static_cast<int>(table)]) {
    if (r.frontend_serial == serial) state->items.push_back(r);
  }
  state->failed = failed_;
  std::lock_guard wl(watch_mu_);
  watchers_.emplace(Key{table, serial}, state);
  return Watch(state);
}

void Store::notify(const ConfigRecord& r) {
  std::lock_guard wl(watch_mu_);
  auto [lo, hi] = watchers_.equal_range({r.table, r.frontend_serial});
  for (auto it = lo; it != hi;) {
    if (auto s = it->second.lock()) {
      {
        std::lock_guard sl(s->mu);
        s->items.push_back(r);
      }
      s->cv.notify_all();
      ++it;
    } else {
      it = watchers_.erase(it);
    }
  }
}

void Store::fail_watchers() {
  std::lock_guard wl(watch_mu_);
  for (auto& [k, w] : watchers_) {
    if (auto s = w.lock()) {
      {
        std::lock_guard sl(s->mu);
        s->failed = true;
      }
      s->cv.notify_all();
    }
  }
}

std::uint64_t Store::revision() const {
  std::shared_lock lock(mu_);
  return revision_;
}

std::size_t Store::journal_entries() const {
  std::shared_lock lock(mu_);
  return journal_entries_;
}

json Store::snapshot_json() const {
  json snap{{"format", kSnapshotFormat},
            {"version", kSnapshotVersion},
            {"revision", revision_},
            {"links", links_},
            {"tx", json::array()},
            {"rx", json::array()},
            {"ownership", json::array()}};
  for (const auto& [id, r] : tables_[0]) snap["tx"].push_back(r);
  for (const auto& [id, r] : tables_[1]) snap["rx"].push_back(r);
  for (const auto& [k, o] : owners_) snap["ownership"].push_back(o);
  return snap;
}

void Store::compact() {
  std::unique_lock lock(mu_);
  compact_locked();
}

void Store::compact_locked() {
  const std::filesystem::path tmp = snapshot_path_.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) storage_error(tmp, "cannot create snapshot: " + errno_text());
  try {
    write_all(fd, snapshot_json().dump() + "\n", tmp);
    if (::fsync(fd) != 0) storage_error(tmp, "fsync failed: " + errno_text());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (::rename(tmp.c_str(), snapshot_path_.c_str()) != 0) storage_error(snapshot_path_, "rename failed: " + errno_text());
  // Entries at or below the snapshot revision are skipped on replay, so a
  // crash between the rename and this truncate is harmless.
  if (::ftruncate(fd_, 0) != 0) storage_error(path_, "truncate failed: " + errno_text());
  journal_entries_ = 0;
}

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      if (c + 1 < cells.size()) os << "  ";
    }
    os << '\n';
  };
  line(header);
  for (const auto& row : rows) line(row);
  return os.str();
}

}  // namespace

std::string render_tables(const Store& store) {
  std::ostringstream os;
  const std::vector<std::string> header{"id", "serial", "carrier_hz", "bandwidth_hz", "sample_rate_hz",
                                        "gain_db", "mcs_id", "rev", "extras"};
  for (Table t : {Table::Tx, Table::Rx}) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : store.records(t)) {
      std::string extras;
      for (const auto& [k, v] : r.extras) extras += (extras.empty() ? "" : ",") + k + "=" + v;
      rows.push_back({std::to_string(r.id), r.frontend_serial, format_number(r.carrier_hz),
                      format_number(r.bandwidth_hz), format_number(r.sample_rate_hz), format_number(r.gain_db),
                      r.mcs_id, std::to_string(r.updated_at), extras});
    }
    os << "[" << to_string(t) << "]\n" << render_grid(header, rows) << '\n';
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& o : store.ownerships())
    rows.push_back({o.link_id, o.frontend_serial, std::string(to_string(o.direction))});
  os << "[Ownership]\n" << render_grid({"link_id", "serial", "direction"}, rows);
  os << "\nrevision " << store.revision() << '\n';
  return os.str();
}

}  // namespace emulab::configdb
