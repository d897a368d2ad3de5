// Field accessors shared by the document loaders. Each throws mcrts::Error
// carrying the dotted document path of the offending field.
#pragma once

#include <string>

#include "json.hpp"
#include "mcrts/error.hpp"

namespace mcrts::detail {

using nlohmann::json;

inline const json& require(const json& obj, const char* key, const std::string& path,
                           ErrorKind kind = ErrorKind::InvalidField) {
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(kind, std::string("missing field '") + key + "'", path + "." + key);
  return *it;
}

inline double number(const json& obj, const char* key, const std::string& path,
                     ErrorKind kind = ErrorKind::InvalidField) {
  const json& v = require(obj, key, path, kind);
  if (!v.is_number()) throw Error(kind, "expected a number", path + "." + key);
  return v.get<double>();
}

inline std::string text(const json& obj, const char* key, const std::string& path,
                        ErrorKind kind = ErrorKind::InvalidField) {
  const json& v = require(obj, key, path, kind);
  if (!v.is_string()) throw Error(kind, "expected a string", path + "." + key);
  return v.get<std::string>();
}

inline std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

inline std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

}  // namespace mcrts::detail
