#include "mpforge/error.hpp"

namespace mpforge {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_dimension: return "invalid-dimension";
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::invalid_observation: return "invalid-observation";
    case ErrorKind::unsupported_model: return "unsupported-model";
    case ErrorKind::numeric_error: return "numeric-error";
    case ErrorKind::internal_error: return "internal-error";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message, std::string field)
    : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}

void fail(ErrorKind kind, const std::string& message, std::string field) {
  throw Error(kind, message, std::move(field));
}

}  // namespace mpforge
