#pragma once

#include <string>

namespace mpforge {

enum class LogLevel { error, warn, info, debug };

/// Reads MPFORGE_LOG (error|warn|info|debug); default warn. Unknown values fall back to warn.
void configure_logging_from_env();
void set_log_level(LogLevel level);

void log_error(const std::string& msg);
void log_warn(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace mpforge
