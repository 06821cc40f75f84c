#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mpforge {

enum class ErrorKind {
  invalid_dimension,
  invalid_parameter,
  invalid_config,
  invalid_observation,
  unsupported_model,
  numeric_error,
  internal_error,
  io_error,
};

/// Stable lowercase-hyphenated name, used in machine-readable error output.
std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string field = {});

  ErrorKind kind() const noexcept { return kind_; }
  /// Config key or argument name the error refers to; empty if none.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorKind kind_;
  std::string field_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message, std::string field = {});

inline void require(bool ok, ErrorKind kind, const std::string& message) {
  if (!ok) fail(kind, message);
}

}  // namespace mpforge
