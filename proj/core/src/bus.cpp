#include "emulab/bus.hpp"

#include <algorithm>

#include "emulab/error.hpp"

namespace emulab::bus {

std::string_view to_string(TopicKind k) noexcept {
  switch (k) {
    case TopicKind::Payload: return "Payload";
    case TopicKind::Telemetry: return "Telemetry";
    case TopicKind::Control: return "Control";
    case TopicKind::Feedback: return "Feedback";
  }
  return "?";
}

std::string_view to_string(Mode m) noexcept { return m == Mode::All ? "All" : "Latest"; }

bool valid_topic_name(std::string_view name) noexcept {
  // A leading underscore is reserved for TCP control frames.
  if (name.empty() || name.front() == '_') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
  });
}

Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }

// ---- Subscription ------------------------------------------------------------

std::optional<Envelope> Subscription::next(std::chrono::microseconds timeout) {
  std::unique_lock lock(state_->mu);
  state_->cv.wait_for(lock, timeout, [&] { return !state_->queue.empty() || state_->closed; });
  if (state_->queue.empty()) return std::nullopt;
  Envelope e = std::move(state_->queue.front());
  state_->queue.pop_front();
  return e;
}

std::optional<Envelope> Subscription::try_next() { return next(std::chrono::microseconds(0)); }

std::optional<Envelope> Subscription::newest() {
  std::lock_guard lock(state_->mu);
  if (state_->queue.empty()) return std::nullopt;
  Envelope e = std::move(state_->queue.back());
  state_->dropped += state_->queue.size() - 1;
  state_->queue.clear();
  return e;
}

void Subscription::close() {
  {
    std::lock_guard lock(state_->mu);
    state_->closed = true;
  }
  state_->cv.notify_all();
}

std::uint64_t Subscription::dropped() const {
  std::lock_guard lock(state_->mu);
  return state_->dropped;
}

// ---- Publisher -----------------------------------------------------------------

Publisher::Publisher(Bus& bus, std::string topic) : bus_(&bus), topic_(std::move(topic)) {
  if (!bus.has_topic(topic_)) throw Error(Errc::UnknownTopic, topic_, "topic is not registered");
}

std::uint64_t Publisher::publish(std::span<const std::uint8_t> payload) { return bus_->deliver(*this, payload); }

std::uint64_t Publisher::publish(std::string_view text) {
  return publish(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---- Bus ---------------------------------------------------------------------

Bus::Bus() : epoch_(std::chrono::steady_clock::now()) {}
Bus::~Bus() = default;

void Bus::register_topic(const std::string& name, TopicKind kind) {
  if (!valid_topic_name(name)) throw Error(Errc::BadTopicName, name, "topic names match [a-z0-9._-]+ and do not start with _");
  std::lock_guard lock(mu_);
  if (auto it = topics_.find(name); it != topics_.end()) {
    if (it->second.kind != kind) throw Error(Errc::DuplicateTopic, name, "topic registered with another kind");
    return;
  }
  auto& e = topics_[name];
  e.kind = kind;
  e.default_publisher.reset(new Publisher(this, name));
}

bool Bus::has_topic(std::string_view name) const {
  std::lock_guard lock(mu_);
  return topics_.find(name) != topics_.end();
}

std::optional<TopicKind> Bus::topic_kind(std::string_view name) const {
  std::lock_guard lock(mu_);
  if (auto it = topics_.find(name); it != topics_.end()) return it->second.kind;
  return std::nullopt;
}

std::vector<std::string> Bus::topics() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [name, e] : topics_) out.push_back(name);
  return out;
}

Bus::TopicEntry& Bus::entry(std::string_view name) {
  auto it = topics_.find(name);
  if (it == topics_.end()) throw Error(Errc::UnknownTopic, std::string(name), "topic is not registered");
  return it->second;
}

std::uint64_t Bus::publish(const std::string& topic, std::span<const std::uint8_t> payload) {
  Publisher* pub = nullptr;
  {
    std::lock_guard lock(mu_);
    pub = entry(topic).default_publisher.get();
  }
  return deliver(*pub, payload);
}

std::uint64_t Bus::publish(const std::string& topic, std::string_view text) {
  return publish(topic, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t Bus::deliver(Publisher& pub, std::span<const std::uint8_t> payload) {
  if (payload.size() > kMaxPayloadBytes)
    throw Error(Errc::PayloadTooLarge, pub.topic_, std::to_string(payload.size()) + " bytes exceeds 16 MiB");
  // The publisher lock spans seq assignment and delivery so that concurrent
  // callers on one publisher still enqueue in seq order.
  std::lock_guard plock(pub.mu_);
  std::vector<std::shared_ptr<SubscriptionState>> targets;
  {
    std::lock_guard lock(mu_);
    auto& e = entry(pub.topic_);
    auto& subs = e.subscribers;
    for (auto it = subs.begin(); it != subs.end();) {
      if (auto s = it->lock()) {
        targets.push_back(std::move(s));
        ++it;
      } else {
        it = subs.erase(it);
      }
    }
  }
  Envelope env{pub.topic_, ++pub.seq_, now_us(), Bytes(payload.begin(), payload.end())};
  for (std::size_t i = 0; i < targets.size(); ++i) {
    auto& s = targets[i];
    {
      std::lock_guard sl(s->mu);
      if (s->closed) continue;
      s->queue.push_back(i + 1 == targets.size() ? std::move(env) : env);
      if (s->mode == Mode::Latest && s->queue.size() > kLatestDepth) {
        s->queue.pop_front();
        ++s->dropped;
      }
    }
    s->cv.notify_one();
  }
  return pub.seq_;
}

std::unique_ptr<Subscription> Bus::subscribe(const std::string& topic, Mode mode) {
  return subscribe(std::vector<std::string>{topic}, mode);
}

std::unique_ptr<Subscription> Bus::subscribe(const std::vector<std::string>& topics, Mode mode) {
  auto state = std::make_shared<SubscriptionState>();
  state->mode = mode;
  std::lock_guard lock(mu_);
  for (const auto& t : topics) entry(t);
  for (const auto& t : topics) entry(t).subscribers.push_back(state);
  return std::make_unique<Subscription>(state);
}

std::uint64_t Bus::now_us() {
  const auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                           std::chrono::steady_clock::now() - epoch_)
                           .count();
  std::uint64_t candidate = static_cast<std::uint64_t>(elapsed);
  std::uint64_t last = last_us_.load(std::memory_order_relaxed);
  for (;;) {
    const std::uint64_t next = std::max(candidate, last + 1);
    if (last_us_.compare_exchange_weak(last, next, std::memory_order_relaxed)) return next;
  }
}

}  // namespace emulab::bus
