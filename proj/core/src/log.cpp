#include "mpforge/log.hpp"

#include <cstdlib>
#include <mutex>
#include <string_view>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace mpforge {
namespace {

std::shared_ptr<spdlog::logger> make_logger() {
  auto lg = spdlog::stderr_logger_mt("mpforge");
  lg->set_pattern("[%l] %v");
  lg->set_level(spdlog::level::warn);
  return lg;
}

spdlog::logger& logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> lg;
  std::call_once(once, [] {
    lg = spdlog::get("mpforge");
    if (!lg) lg = make_logger();
  });
  return *lg;
}

}  // namespace

void set_log_level(LogLevel level) {
  switch (level) {
    case LogLevel::error: logger().set_level(spdlog::level::err); break;
    case LogLevel::warn: logger().set_level(spdlog::level::warn); break;
    case LogLevel::info: logger().set_level(spdlog::level::info); break;
    case LogLevel::debug: logger().set_level(spdlog::level::debug); break;
  }
}

void configure_logging_from_env() {
  const char* env = std::getenv("MPFORGE_LOG");
  std::string_view v = env ? env : "warn";
  if (v == "error") set_log_level(LogLevel::error);
  else if (v == "info") set_log_level(LogLevel::info);
  else if (v == "debug") set_log_level(LogLevel::debug);
  else set_log_level(LogLevel::warn);
}

void log_error(const std::string& msg) { logger().error(msg); }
void log_warn(const std::string& msg) { logger().warn(msg); }
void log_info(const std::string& msg) { logger().info(msg); }
void log_debug(const std::string& msg) { logger().debug(msg); }

}  // namespace mpforge
