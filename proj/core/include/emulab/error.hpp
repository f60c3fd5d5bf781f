#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emulab {

// Error kinds raised across the library. Each maps to one failure named in a
// module contract; `detail` carries the offending field, id or name.
enum class Errc {
  // scenario
  SyntaxError,
  SchemaError,
  EmptyTable,
  // configdb
  InvariantViolation,
  StorageError,
  AlreadyOwned,
  UnknownLink,
  NotFound,
  // bus
  UnknownTopic,
  PayloadTooLarge,
  DuplicateTopic,
  BadTopicName,
  IoError,
  // phy
  UnsupportedRate,
  PayloadTooLong,
  LengthMismatch,
  UnknownModulation,
  BadParams,
  DegenerateInput,
  NoFrameFound,
  // channel
  CoincidentNodes,
  ConfigMissing,
  UnknownFrontend,
  UnknownNode,
  // calib
  NotRunning,
  NotConverged,
  NotOwned,
  Timeout,
  // emud
  ValidationFailed,
  RunBusy,
  UnknownRun,
  WrongPhase,
  BadCommand,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail, std::string message = {});

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

// Syntax errors additionally carry the byte offset of the fault.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::string message);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace emulab
