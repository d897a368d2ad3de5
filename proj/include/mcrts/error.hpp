#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mcrts {

enum class ErrorKind {
  MalformedDocument,
  DanglingNodeReference,
  DuplicateId,
  InvalidField,
  UnknownEdge,
  UnknownNode,
  OutOfRangeValue,
  NoRoute,
  NoCandidateVehicle,
  InvalidScenario,
  UnknownRequest,
  InvalidParameter,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. `path()` names the offending document location
/// (e.g. "edges[2].from_node") when the error comes from an input file.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string path = {});

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorKind kind_;
  std::string path_;
};

}  // namespace mcrts
