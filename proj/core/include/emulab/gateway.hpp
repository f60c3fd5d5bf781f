#pragma once

#include <memory>
#include <string>

#include "emulab/emud.hpp"

// HTTP front door to an Emulator.
//
//   GET  /health                   200 {"ok":true}
//   POST /runs                     scenario JSON -> 201 {"run_id"}; 400 parse, 422 violations, 409 busy
//   GET  /runs/{id}                200 run snapshot; 404 unknown
//   POST /runs/{id}/start          200 run snapshot; 404, 409 wrong phase
//   POST /runs/{id}/control        command JSON -> 200 ack; 400, 404, 409
//   GET  /runs/{id}/telemetry      NDJSON stream of bus envelopes for the run
//
// Query parameters on /telemetry: limit=N closes after N messages,
// timeout_s=T closes after T seconds.
namespace emulab::gateway {

class Gateway {
 public:
  explicit Gateway(emud::Emulator& emulator);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Binds and serves on a background thread; port 0 picks an ephemeral port.
  // Returns the bound port. Throws IoError when the bind fails.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Envelope as one NDJSON line: {"topic","seq","timestamp_us","payload"}.
// JSON payloads are embedded as objects, anything else as a string.
std::string envelope_line(const bus::Envelope& e);

}  // namespace emulab::gateway
