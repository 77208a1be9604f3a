#pragma once

#include <spdlog/spdlog.h>

namespace depthfuse::log {

// Reads DEPTHFUSE_LOG (error|info|debug); defaults to info.
void init_from_env();

template <typename... Args>
void warn(const char* fmt, Args&&... args) {
  spdlog::warn(SPDLOG_FMT_RUNTIME(fmt), std::forward<Args>(args)...);
}

template <typename... Args>
void info(const char* fmt, Args&&... args) {
  spdlog::info(SPDLOG_FMT_RUNTIME(fmt), std::forward<Args>(args)...);
}

template <typename... Args>
void debug(const char* fmt, Args&&... args) {
  spdlog::debug(SPDLOG_FMT_RUNTIME(fmt), std::forward<Args>(args)...);
}

}  // namespace depthfuse::log
