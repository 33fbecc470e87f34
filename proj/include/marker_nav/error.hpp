#pragma once

#include <stdexcept>
#include <string>

namespace marker_nav {

enum class ErrorCode {
  BehindCamera,
  DegenerateConfiguration,
  NoValidPose,
  SingularInnovation,
  AtWaypoint,
  BothInvalid,
  ConfigError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoValidPose: return "NoValidPose";
    case ErrorCode::SingularInnovation: return "SingularInnovation";
    case ErrorCode::AtWaypoint: return "AtWaypoint";
    case ErrorCode::BothInvalid: return "BothInvalid";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Configuration problem; `key()` names the offending config key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(ErrorCode::ConfigError, "'" + key + "': " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace marker_nav
