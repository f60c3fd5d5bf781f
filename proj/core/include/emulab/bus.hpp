#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// In-process publish/subscribe bus standing in for DDS, plus the TCP framing
// used to carry envelopes between processes.
namespace emulab::bus {

enum class TopicKind { Payload, Telemetry, Control, Feedback };
enum class Mode { Latest, All };

constexpr std::size_t kMaxPayloadBytes = 16u << 20;
constexpr std::size_t kLatestDepth = 64;

std::string_view to_string(TopicKind k) noexcept;
std::string_view to_string(Mode m) noexcept;
bool valid_topic_name(std::string_view name) noexcept;

using Bytes = std::vector<std::uint8_t>;

struct Envelope {
  std::string topic;
  std::uint64_t seq = 0;
  std::uint64_t timestamp_us = 0;
  Bytes payload;

  std::string_view text() const noexcept {
    return {reinterpret_cast<const char*>(payload.data()), payload.size()};
  }
  bool operator==(const Envelope&) const = default;
};

Bytes to_bytes(std::string_view text);

// Queue behind one subscription. Shared between the bus (producer side) and
// the Subscription handle.
struct SubscriptionState {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Envelope> queue;
  Mode mode = Mode::All;
  bool closed = false;
  std::uint64_t dropped = 0;
};

class Subscription {
 public:
  explicit Subscription(std::shared_ptr<SubscriptionState> state) : state_(std::move(state)) {}
  ~Subscription() { close(); }
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;

  // Blocks up to `timeout`; nullopt on timeout or after close().
  std::optional<Envelope> next(std::chrono::microseconds timeout);
  std::optional<Envelope> try_next();
  // Drains the queue, returning only the newest envelope (Latest semantics
  // for a consumer that wants current state only).
  std::optional<Envelope> newest();
  void close();
  Mode mode() const noexcept { return state_->mode; }
  std::uint64_t dropped() const;

 private:
  std::shared_ptr<SubscriptionState> state_;
};

class Bus;

// A publisher owns its own per-topic sequence, starting at 1.
class Publisher {
 public:
  Publisher(Bus& bus, std::string topic);
  std::uint64_t publish(std::span<const std::uint8_t> payload);
  std::uint64_t publish(std::string_view text);
  const std::string& topic() const noexcept { return topic_; }

 private:
  friend class Bus;
  Publisher(Bus* bus, std::string topic) : bus_(bus), topic_(std::move(topic)) {}

  Bus* bus_;
  std::string topic_;
  std::uint64_t seq_ = 0;
  std::mutex mu_;
};

class Bus {
 public:
  Bus();
  ~Bus();
  Bus(const Bus&) = delete;
  Bus& operator=(const Bus&) = delete;

  // Throws DuplicateTopic when `name` exists with another kind; registering
  // the same (name, kind) twice is a no-op.
  void register_topic(const std::string& name, TopicKind kind);
  bool has_topic(std::string_view name) const;
  std::optional<TopicKind> topic_kind(std::string_view name) const;
  std::vector<std::string> topics() const;

  // Publishes through the topic's default publisher.
  std::uint64_t publish(const std::string& topic, std::span<const std::uint8_t> payload);
  std::uint64_t publish(const std::string& topic, std::string_view text);

  std::unique_ptr<Subscription> subscribe(const std::string& topic, Mode mode);
  std::unique_ptr<Subscription> subscribe(const std::vector<std::string>& topics, Mode mode);

  // Microseconds since the bus was created; strictly increasing across calls.
  std::uint64_t now_us();

 private:
  friend class Publisher;
  struct TopicEntry {
    TopicKind kind = TopicKind::Telemetry;
    std::unique_ptr<Publisher> default_publisher;
    std::vector<std::weak_ptr<SubscriptionState>> subscribers;
  };

  std::uint64_t deliver(Publisher& pub, std::span<const std::uint8_t> payload);
  TopicEntry& entry(std::string_view name);

  mutable std::mutex mu_;
  std::map<std::string, TopicEntry, std::less<>> topics_;
  std::chrono::steady_clock::time_point epoch_;
  std::atomic<std::uint64_t> last_us_{0};
};

// ---- wire format ----------------------------------------------------------
//
// frame    = u32be body_len, body
// body     = u16be topic_len, topic bytes, u64be seq, u64be timestamp_us, payload
// payload  = remaining body_len - 18 - topic_len bytes

Bytes encode_frame(const Envelope& env);
// Decodes one body (without the 4-byte length). Throws BadParams on
// malformed input.
Envelope decode_body(std::span<const std::uint8_t> body);

// Control topics understood by the TCP server.
// payload: mode byte (0 Latest, 1 All), topic name; echoed back as the ack
constexpr std::string_view kSubscribeTopic = "_sub";
constexpr std::string_view kErrorTopic = "_err";      // payload: "<ErrcName>: <detail>"

class TcpServer {
 public:
  // Binds host:port (port 0 picks a free port). Serves until stop().
  TcpServer(Bus& bus, const std::string& host, std::uint16_t port);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const noexcept { return port_; }
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::uint16_t port_ = 0;
};

class TcpClient {
 public:
  TcpClient(const std::string& host, std::uint16_t port);
  ~TcpClient();
  TcpClient(const TcpClient&) = delete;
  TcpClient& operator=(const TcpClient&) = delete;

  // Publishes to a topic on the remote bus. The seq in the envelope is the
  // client's own counter; the server republishes under its publisher.
  void publish(const std::string& topic, std::span<const std::uint8_t> payload);
  // Returns once the server has registered the subscription.
  void subscribe(const std::string& topic, Mode mode);
  // Next envelope from the server; nullopt on timeout. Throws on a server
  // error frame or disconnect.
  std::optional<Envelope> receive(std::chrono::milliseconds timeout);

 private:
  std::optional<Envelope> read_one(std::chrono::milliseconds timeout);

  int fd_ = -1;
  std::uint64_t seq_ = 0;
  std::deque<Envelope> pending_;
  std::mutex write_mu_;
};

}  // namespace emulab::bus
