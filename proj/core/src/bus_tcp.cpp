#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <list>
#include <thread>

#include "emulab/bus.hpp"
#include "emulab/error.hpp"

namespace emulab::bus {

namespace {

constexpr std::size_t kHeaderBytes = 2 + 8 + 8;
constexpr std::size_t kMaxBody = kHeaderBytes + 0xFFFF + kMaxPayloadBytes;

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint64_t get_be(const std::uint8_t* p, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i) v = (v << 8) | p[i];
  return v;
}

[[noreturn]] void io_error(const std::string& what) { throw Error(Errc::IoError, "tcp", what + ": " + std::strerror(errno)); }

bool write_all(int fd, const Bytes& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

bool read_exact(int fd, std::uint8_t* dst, std::size_t n) {
  std::size_t off = 0;
  while (off < n) {
    const ssize_t r = ::recv(fd, dst + off, n - off, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(r);
  }
  return true;
}

// Reads one frame body; nullopt on EOF or a malformed length.
std::optional<Bytes> read_frame(int fd) {
  std::uint8_t len_be[4];
  if (!read_exact(fd, len_be, 4)) return std::nullopt;
  const auto len = static_cast<std::size_t>(get_be(len_be, 4));
  if (len < kHeaderBytes || len > kMaxBody) return std::nullopt;
  Bytes body(len);
  if (!read_exact(fd, body.data(), len)) return std::nullopt;
  return body;
}

Envelope control_envelope(std::string_view topic, std::uint64_t seq, Bytes payload) {
  return Envelope{std::string(topic), seq, 0, std::move(payload)};
}

}  // namespace

Bytes encode_frame(const Envelope& env) {
  if (env.topic.size() > 0xFFFF) throw Error(Errc::BadTopicName, env.topic, "topic longer than 65535 bytes");
  if (env.payload.size() > kMaxPayloadBytes) throw Error(Errc::PayloadTooLarge, env.topic, "payload exceeds 16 MiB");
  Bytes out;
  const std::size_t body = kHeaderBytes + env.topic.size() + env.payload.size();
  out.reserve(4 + body);
  put_u32(out, static_cast<std::uint32_t>(body));
  put_u16(out, static_cast<std::uint16_t>(env.topic.size()));
  out.insert(out.end(), env.topic.begin(), env.topic.end());
  put_u64(out, env.seq);
  put_u64(out, env.timestamp_us);
  out.insert(out.end(), env.payload.begin(), env.payload.end());
  return out;
}

Envelope decode_body(std::span<const std::uint8_t> body) {
  if (body.size() < kHeaderBytes) throw Error(Errc::BadParams, "frame", "body shorter than header");
  const auto topic_len = static_cast<std::size_t>(get_be(body.data(), 2));
  if (body.size() < kHeaderBytes + topic_len) throw Error(Errc::BadParams, "frame", "topic overruns body");
  Envelope env;
  env.topic.assign(reinterpret_cast<const char*>(body.data() + 2), topic_len);
  const std::uint8_t* p = body.data() + 2 + topic_len;
  env.seq = get_be(p, 8);
  env.timestamp_us = get_be(p + 8, 8);
  env.payload.assign(p + 16, body.data() + body.size());
  if (env.payload.size() > kMaxPayloadBytes) throw Error(Errc::PayloadTooLarge, env.topic, "payload exceeds 16 MiB");
  return env;
}

// ---- server ----------------------------------------------------------------

struct TcpServer::Impl {
  struct Conn {
    int fd = -1;
    std::mutex write_mu;
    std::atomic<bool> alive{true};
    std::atomic<bool> done{false};
    std::thread reader;
    std::list<std::thread> forwarders;
    std::list<std::unique_ptr<Subscription>> subs;
    std::map<std::string, std::unique_ptr<Publisher>> pubs;
    std::uint64_t err_seq = 0;
  };

  Bus& bus;
  int listen_fd = -1;
  std::atomic<bool> running{true};
  std::thread acceptor;
  std::mutex conns_mu;
  std::list<std::unique_ptr<Conn>> conns;

  explicit Impl(Bus& b) : bus(b) {}

  void send(Conn& c, const Envelope& env) {
    const Bytes frame = encode_frame(env);
    std::lock_guard lock(c.write_mu);
    if (!write_all(c.fd, frame)) c.alive = false;
  }

  void send_error(Conn& c, const std::string& text) {
    send(c, control_envelope(kErrorTopic, ++c.err_seq, to_bytes(text)));
  }

  void serve(Conn& c) {
    while (c.alive && running) {
      auto body = read_frame(c.fd);
      if (!body) break;
      Envelope env;
      try {
        env = decode_body(*body);
      } catch (const Error& e) {
        send_error(c, e.what());
        break;
      }
      try {
        if (env.topic == kSubscribeTopic) {
          if (env.payload.empty()) throw Error(Errc::BadParams, "_sub", "missing mode byte");
          const Mode mode = env.payload[0] == 0 ? Mode::Latest : Mode::All;
          const std::string topic(env.payload.begin() + 1, env.payload.end());
          auto sub = bus.subscribe(topic, mode);
          Subscription* raw = sub.get();
          c.subs.push_back(std::move(sub));
          c.forwarders.emplace_back([this, &c, raw] {
            while (c.alive && running) {
              if (auto e = raw->next(std::chrono::milliseconds(100))) send(c, *e);
            }
          });
          send(c, control_envelope(kSubscribeTopic, 0, env.payload));
        } else {
          auto& pub = c.pubs[env.topic];
          if (!pub) pub = std::make_unique<Publisher>(bus, env.topic);
          pub->publish(env.payload);
        }
      } catch (const Error& e) {
        send_error(c, e.what());
      }
    }
    c.alive = false;
    for (auto& s : c.subs) s->close();
    for (auto& t : c.forwarders) t.join();
    ::shutdown(c.fd, SHUT_RDWR);
    c.done = true;
  }

  void reap() {
    std::lock_guard lock(conns_mu);
    for (auto it = conns.begin(); it != conns.end();) {
      if ((*it)->done) {
        (*it)->reader.join();
        ::close((*it)->fd);
        it = conns.erase(it);
      } else {
        ++it;
      }
    }
  }

  void accept_loop() {
    while (running) {
      pollfd pfd{listen_fd, POLLIN, 0};
      const int r = ::poll(&pfd, 1, 100);
      reap();
      if (r <= 0) continue;
      const int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      auto conn = std::make_unique<Conn>();
      conn->fd = fd;
      Conn* raw = conn.get();
      std::lock_guard lock(conns_mu);
      conns.push_back(std::move(conn));
      raw->reader = std::thread([this, raw] { serve(*raw); });
    }
  }
};

TcpServer::TcpServer(Bus& bus, const std::string& host, std::uint16_t port) : impl_(std::make_unique<Impl>(bus)) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
    throw Error(Errc::IoError, host, "cannot resolve listen address");
  const int fd = ::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    io_error("socket");
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
    ::freeaddrinfo(res);
    ::close(fd);
    io_error("bind " + host + ":" + service);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  impl_->listen_fd = fd;
  impl_->acceptor = std::thread([this] { impl_->accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::stop() {
  if (!impl_ || !impl_->running.exchange(false)) return;
  impl_->acceptor.join();
  ::close(impl_->listen_fd);
  {
    std::lock_guard lock(impl_->conns_mu);
    for (auto& c : impl_->conns) {
      c->alive = false;
      ::shutdown(c->fd, SHUT_RDWR);
    }
  }
  for (auto& c : impl_->conns) {
    c->reader.join();
    ::close(c->fd);
  }
  impl_->conns.clear();
}

// ---- client ----------------------------------------------------------------

TcpClient::TcpClient(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
    throw Error(Errc::IoError, host, "cannot resolve bus address");
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) io_error("connect " + host + ":" + service);
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

TcpClient::~TcpClient() {
  if (fd_ >= 0) ::close(fd_);
}

void TcpClient::publish(const std::string& topic, std::span<const std::uint8_t> payload) {
  std::lock_guard lock(write_mu_);
  const Envelope env{topic, ++seq_, 0, Bytes(payload.begin(), payload.end())};
  if (!write_all(fd_, encode_frame(env))) io_error("send");
}

void TcpClient::subscribe(const std::string& topic, Mode mode) {
  Bytes payload{static_cast<std::uint8_t>(mode == Mode::All ? 1 : 0)};
  payload.insert(payload.end(), topic.begin(), topic.end());
  {
    std::lock_guard lock(write_mu_);
    if (!write_all(fd_, encode_frame(Envelope{std::string(kSubscribeTopic), 0, 0, payload}))) io_error("send");
  }
  // Wait for the acknowledgement so that publishes issued after this call
  // are guaranteed to reach the subscription.
  for (;;) {
    auto env = read_one(std::chrono::milliseconds(5000));
    if (!env) throw Error(Errc::Timeout, topic, "no subscribe acknowledgement");
    if (env->topic == kSubscribeTopic) return;
    pending_.push_back(std::move(*env));
  }
}

std::optional<Envelope> TcpClient::receive(std::chrono::milliseconds timeout) {
  if (!pending_.empty()) {
    Envelope env = std::move(pending_.front());
    pending_.pop_front();
    return env;
  }
  return read_one(timeout);
}

std::optional<Envelope> TcpClient::read_one(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int r = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (r == 0) return std::nullopt;
  if (r < 0) io_error("poll");
  auto body = read_frame(fd_);
  if (!body) throw Error(Errc::IoError, "tcp", "connection closed");
  Envelope env = decode_body(*body);
  if (env.topic == kErrorTopic) throw Error(Errc::IoError, "remote", std::string(env.text()));
  return env;
}

}  // namespace emulab::bus
