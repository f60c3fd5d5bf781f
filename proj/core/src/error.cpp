#include "emulab/error.hpp"

namespace emulab {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::SchemaError: return "SchemaError";
    case Errc::EmptyTable: return "EmptyTable";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::StorageError: return "StorageError";
    case Errc::AlreadyOwned: return "AlreadyOwned";
    case Errc::UnknownLink: return "UnknownLink";
    case Errc::NotFound: return "NotFound";
    case Errc::UnknownTopic: return "UnknownTopic";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::DuplicateTopic: return "DuplicateTopic";
    case Errc::BadTopicName: return "BadTopicName";
    case Errc::IoError: return "IoError";
    case Errc::UnsupportedRate: return "UnsupportedRate";
    case Errc::PayloadTooLong: return "PayloadTooLong";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::UnknownModulation: return "UnknownModulation";
    case Errc::BadParams: return "BadParams";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::NoFrameFound: return "NoFrameFound";
    case Errc::CoincidentNodes: return "CoincidentNodes";
    case Errc::ConfigMissing: return "ConfigMissing";
    case Errc::UnknownFrontend: return "UnknownFrontend";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::NotRunning: return "NotRunning";
    case Errc::NotConverged: return "NotConverged";
    case Errc::NotOwned: return "NotOwned";
    case Errc::Timeout: return "Timeout";
    case Errc::ValidationFailed: return "ValidationFailed";
    case Errc::RunBusy: return "RunBusy";
    case Errc::UnknownRun: return "UnknownRun";
    case Errc::WrongPhase: return "WrongPhase";
    case Errc::BadCommand: return "BadCommand";
  }
  return "Unknown";
}

namespace {

std::string compose(Errc code, const std::string& detail, const std::string& message) {
  std::string out(errc_name(code));
  if (!detail.empty()) out += "(" + detail + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

}  // namespace

Error::Error(Errc code, std::string detail, std::string message)
    : std::runtime_error(compose(code, detail, message)), code_(code), detail_(std::move(detail)) {}

SyntaxError::SyntaxError(std::size_t offset, std::string message)
    : Error(Errc::SyntaxError, std::to_string(offset), std::move(message)), offset_(offset) {}

}  // namespace emulab
