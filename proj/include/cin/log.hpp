#pragma once

// Minimal stderr logger. CIN_LOG selects the threshold: error, warn, info, debug.

#include <atomic>
#include <sstream>
#include <string>
#include <string_view>

namespace cin::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

/// Reads CIN_LOG once; unknown values fall back to warn.
Level threshold();
void set_threshold(Level level);
bool enabled(Level level);
void write(Level level, std::string_view message);

template <typename... Args>
void emit(Level level, const Args&... args) {
  if (!enabled(level)) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <typename... Args> void error(const Args&... a) { emit(Level::error, a...); }
template <typename... Args> void warn(const Args&... a) { emit(Level::warn, a...); }
template <typename... Args> void info(const Args&... a) { emit(Level::info, a...); }
template <typename... Args> void debug(const Args&... a) { emit(Level::debug, a...); }

}  // namespace cin::log
