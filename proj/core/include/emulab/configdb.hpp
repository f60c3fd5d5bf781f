#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

// Transmitter, receiver and ownership tables shared by the PHY layer and the
// simulated front ends, persisted as a line-delimited JSON journal.
namespace emulab::configdb {

enum class Table { Tx, Rx };

std::string_view to_string(Table t) noexcept;
std::optional<Table> parse_table(std::string_view text) noexcept;

struct ConfigRecord {
  std::int64_t id = 0;
  std::string frontend_serial;
  Table table = Table::Tx;
  double carrier_hz = 0.0;
  double bandwidth_hz = 0.0;
  double sample_rate_hz = 0.0;
  double gain_db = 0.0;
  std::string mcs_id;
  std::uint64_t updated_at = 0;  // revision of the write that produced this version
  std::map<std::string, std::string> extras;

  bool operator==(const ConfigRecord&) const = default;
};

struct OwnershipRecord {
  std::string link_id;
  std::string frontend_serial;
  Table direction = Table::Tx;

  bool operator==(const OwnershipRecord&) const = default;
};

void to_json(nlohmann::json& j, const ConfigRecord& r);
void from_json(const nlohmann::json& j, ConfigRecord& r);
void to_json(nlohmann::json& j, const OwnershipRecord& r);
void from_json(const nlohmann::json& j, OwnershipRecord& r);

struct StoreOptions {
  double gain_min_db = 0.0;
  double gain_max_db = 30.0;
  std::size_t compact_threshold = 10000;
  // fsync after every append. Without it a record survives a process kill
  // (the write reached the kernel) but not a power loss.
  bool sync_writes = false;
};

// A watch stream. Items are pushed by the writer thread while it holds the
// store's write lock, so per-key order equals revision order.
class Watch {
 public:
  struct State;
  explicit Watch(std::shared_ptr<State> state) : state_(std::move(state)) {}

  std::optional<ConfigRecord> next(std::chrono::milliseconds timeout);
  std::optional<ConfigRecord> try_next();
  // True once the store has failed; pending items are still drained first.
  bool failed() const;

 private:
  std::shared_ptr<State> state_;
};

struct Watch::State {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<ConfigRecord> items;
  bool failed = false;
};

class Store {
 public:
  // Opens or creates the journal at `path` and replays it. A torn final line
  // (crash mid-append) is truncated; any other corruption throws StorageError.
  explicit Store(std::filesystem::path path, StoreOptions options = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  std::uint64_t upsert(const ConfigRecord& record);
  void register_link(const std::string& link_id);
  OwnershipRecord assign(const std::string& link_id, const std::string& frontend_serial, Table direction);

  std::optional<ConfigRecord> get(Table table, std::int64_t id) const;
  std::optional<ConfigRecord> find(Table table, std::string_view frontend_serial) const;
  std::vector<ConfigRecord> records(Table table) const;
  std::vector<OwnershipRecord> ownerships() const;
  std::vector<std::string> links() const;
  std::optional<std::string> lookup(std::string_view frontend_serial, Table direction) const;
  // Serial owning `link_id` in `direction`.
  std::optional<std::string> owner(std::string_view link_id, Table direction) const;

  Watch watch(Table table, const std::string& frontend_serial);

  std::uint64_t revision() const;
  std::size_t journal_entries() const;
  const std::filesystem::path& path() const noexcept { return path_; }
  const StoreOptions& options() const noexcept { return options_; }

  // Writes a snapshot and truncates the journal. Runs automatically when the
  // journal exceeds options.compact_threshold entries.
  void compact();

 private:
  using Key = std::pair<Table, std::string>;

  void replay();
  void apply(const nlohmann::json& entry);
  void append(const nlohmann::json& entry);
  void compact_locked();
  void notify(const ConfigRecord& record);
  void fail_watchers();
  void check(const ConfigRecord& record) const;
  nlohmann::json snapshot_json() const;

  std::filesystem::path path_;
  std::filesystem::path snapshot_path_;
  StoreOptions options_;
  int fd_ = -1;
  bool failed_ = false;

  mutable std::shared_mutex mu_;
  std::uint64_t revision_ = 0;
  std::size_t journal_entries_ = 0;
  std::map<std::int64_t, ConfigRecord> tables_[2];
  std::set<std::string> links_;
  std::map<Key, OwnershipRecord> owners_;

  std::mutex watch_mu_;
  std::multimap<Key, std::weak_ptr<Watch::State>> watchers_;
};

// Aligned text rendering of all three tables.
std::string render_tables(const Store& store);

}  // namespace emulab::configdb
