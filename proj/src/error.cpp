#include "mcrts/error.hpp"

namespace mcrts {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedDocument: return "MalformedDocument";
    case ErrorKind::DanglingNodeReference: return "DanglingNodeReference";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::InvalidField: return "InvalidField";
    case ErrorKind::UnknownEdge: return "UnknownEdge";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::OutOfRangeValue: return "OutOfRangeValue";
    case ErrorKind::NoRoute: return "NoRoute";
    case ErrorKind::NoCandidateVehicle: return "NoCandidateVehicle";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::UnknownRequest: return "UnknownRequest";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorKind kind, const std::string& message, const std::string& path) {
  std::string out{to_string(kind)};
  if (!path.empty()) {
    out += " at ";
    out += path;
  }
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, std::string path)
    : std::runtime_error(compose(kind, message, path)), kind_(kind), path_(std::move(path)) {}

}  // namespace mcrts
