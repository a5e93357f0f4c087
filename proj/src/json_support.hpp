#pragma once

// Private helpers for the JSON artifact readers.

#include <cstdlib>
#include <string>

#include "json.hpp"
#include "rppcert/error.hpp"
#include "rppcert/io.hpp"

namespace rppcert::detail {

using json = nlohmann::json;

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(what + ": malformed JSON at byte " + std::to_string(e.byte) + " (" + e.what() +
                     ")");
  }
}

/// Checks `schema_version` (major must match) and `kind`.
inline void check_schema(const json& j, const std::string& kind) {
  if (!j.is_object()) throw ParseError(kind + ": top level is not an object");
  const auto ver = j.value("schema_version", std::string{});
  if (ver.empty()) throw ParseError(kind + ": missing field 'schema_version'");
  if (std::atoi(ver.c_str()) != io::kSchemaMajor) {
    throw ParseError(kind + ": unsupported schema_version " + ver);
  }
  if (j.value("kind", std::string{}) != kind) {
    throw ParseError(kind + ": field 'kind' does not name this artifact");
  }
}

inline json schema_header(const std::string& kind) {
  json j;
  j["schema_version"] = std::to_string(io::kSchemaMajor) + ".0";
  j["kind"] = kind;
  return j;
}

template <typename T>
T require(const json& j, const char* name, const std::string& what) {
  if (!j.contains(name)) throw ParseError(what + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(what + ": field '" + name + "' has the wrong type");
  }
}

}  // namespace rppcert::detail
