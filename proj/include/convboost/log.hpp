#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace convboost {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

namespace detail {

struct LogState {
  std::mutex mutex;
  LogSink sink = [](LogLevel level, std::string_view msg) {
    std::cerr << (level == LogLevel::kWarning ? "warning: " : "") << msg << '\n';
  };
};

inline LogState& log_state() {
  static LogState state;
  return state;
}

}  // namespace detail

// Replaces the process-wide sink; returns the previous one.
inline LogSink set_log_sink(LogSink sink) {
  auto& st = detail::log_state();
  std::lock_guard lock(st.mutex);
  std::swap(st.sink, sink);
  return sink;
}

inline void log(LogLevel level, std::string_view msg) {
  auto& st = detail::log_state();
  std::lock_guard lock(st.mutex);
  if (st.sink) st.sink(level, msg);
}

inline void log_info(std::string_view msg) { log(LogLevel::kInfo, msg); }
inline void log_warning(std::string_view msg) { log(LogLevel::kWarning, msg); }

}  // namespace convboost
