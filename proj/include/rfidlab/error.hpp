#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rfidlab {

enum class ErrorKind {
  shape_mismatch,
  invalid_argument,
  non_finite,
  numeric,
  bad_magic,
  bad_version,
  truncated,
  payload_mismatch,
  dim_overflow,
  io,
  config,
  usage,
  divergence,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::shape_mismatch: return "shape mismatch";
    case ErrorKind::invalid_argument: return "invalid argument";
    case ErrorKind::non_finite: return "non-finite value";
    case ErrorKind::numeric: return "numeric failure";
    case ErrorKind::bad_magic: return "bad magic";
    case ErrorKind::bad_version: return "bad version";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::payload_mismatch: return "payload mismatch";
    case ErrorKind::dim_overflow: return "dim overflow";
    case ErrorKind::io: return "io";
    case ErrorKind::config: return "config";
    case ErrorKind::usage: return "usage";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace rfidlab
