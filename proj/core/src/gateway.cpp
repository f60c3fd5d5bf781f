#include "emulab/gateway.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "emulab/error.hpp"

namespace emulab::gateway {

using nlohmann::json;

std::string envelope_line(const bus::Envelope& e) {
  json j{{"topic", e.topic}, {"seq", e.seq}, {"timestamp_us", e.timestamp_us}};
  auto payload = json::parse(e.text(), nullptr, false);
  j["payload"] = payload.is_discarded() ? json(std::string(e.text())) : std::move(payload);
  return j.dump() + "\n";
}

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::SyntaxError:
    case Errc::SchemaError:
    case Errc::BadCommand:
    case Errc::BadParams: return 400;
    case Errc::UnknownRun:
    case Errc::UnknownLink:
    case Errc::UnknownNode: return 404;
    case Errc::RunBusy:
    case Errc::WrongPhase: return 409;
    case Errc::ValidationFailed: return 422;
    default: return 500;
  }
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, const Error& e) {
  reply(res, http_status(e.code()),
        json{{"error", errc_name(e.code())}, {"detail", e.detail()}, {"message", e.what()}});
}

}  // namespace

struct Gateway::Impl {
  emud::Emulator& emu;
  httplib::Server server;
  std::thread thread;

  explicit Impl(emud::Emulator& e) : emu(e) {
    // SO_REUSEADDR only: a second gateway on a busy port must fail to bind.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
  }

  template <typename F>
  auto guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        reply_error(res, e);
      } catch (const std::exception& e) {
        reply(res, 500, json{{"error", "Internal"}, {"message", e.what()}});
      }
    };
  }

  void routes() {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, json{{"ok", true}}); });

    server.Post("/runs", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto sc = scenario::parse_scenario(req.body);
      try {
        reply(res, 201, json{{"run_id", emu.load(sc)}});
      } catch (const Error& e) {
        if (e.code() != Errc::ValidationFailed) throw;
        json v = json::array();
        for (const auto& x : emu.last_violations()) v.push_back({{"code", x.code}, {"subject", x.subject}, {"message", x.message}});
        reply(res, 422, json{{"error", "ValidationFailed"}, {"violations", std::move(v)}});
      }
    }));

    server.Get(R"(/runs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      reply(res, 200, emud::status_json(emu.status(req.matches[1])));
    }));

    server.Post(R"(/runs/([^/]+)/start)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      emu.start(id);
      reply(res, 200, emud::status_json(emu.status(id)));
    }));

    server.Post(R"(/runs/([^/]+)/control)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body, nullptr, false);
      if (body.is_discarded()) throw Error(Errc::BadCommand, "body", "not JSON");
      const auto ack = emu.control(req.matches[1], emud::parse_command(body));
      reply(res, 200, json{{"run_id", ack.run_id}, {"op", ack.op}, {"timestamp_us", ack.timestamp_us}});
    }));

    server.Get(R"(/runs/([^/]+)/telemetry)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto status = emu.status(id);
      std::vector<std::string> topics{"telemetry.run." + id};
      for (const auto& l : status.links) {
        topics.push_back("telemetry.link." + l.link_id);
        topics.push_back("telemetry.calib." + l.link_id);
      }
      std::shared_ptr<bus::Subscription> sub = emu.bus().subscribe(topics, bus::Mode::All);
      const long limit = req.has_param("limit") ? std::stol(req.get_param_value("limit")) : -1;
      const double timeout_s = req.has_param("timeout_s") ? std::stod(req.get_param_value("timeout_s")) : -1.0;
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
      auto sent = std::make_shared<long>(0);
      // The current run snapshot goes first so late joiners start from state.
      auto first = std::make_shared<std::string>(
          json{{"topic", "telemetry.run." + id}, {"seq", 0}, {"timestamp_us", emu.bus().now_us()},
               {"payload", emud::status_json(status)}}
              .dump() +
          "\n");
      res.set_chunked_content_provider(
          "application/x-ndjson", [=](std::size_t, httplib::DataSink& sink) {
            if (!first->empty()) {
              sink.write(first->data(), first->size());
              first->clear();
              ++*sent;
            }
            while (sink.is_writable()) {
              if (limit >= 0 && *sent >= limit) break;
              if (timeout_s >= 0 && std::chrono::steady_clock::now() >= deadline) break;
              auto env = sub->next(std::chrono::milliseconds(100));
              if (!env) continue;
              const auto line = envelope_line(*env);
              if (!sink.write(line.data(), line.size())) return false;
              ++*sent;
              return true;
            }
            sink.done();
            return true;
          });
    }));
  }
};

Gateway::Gateway(emud::Emulator& emulator) : impl_(std::make_unique<Impl>(emulator)) {}

Gateway::~Gateway() { stop(); }

int Gateway::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(Errc::IoError, host + ":" + std::to_string(port), "bind failed");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Gateway::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error(Errc::IoError, host + ":" + std::to_string(port), "listen failed");
}

void Gateway::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace emulab::gateway
