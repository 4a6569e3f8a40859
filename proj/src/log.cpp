#include "cin/log.hpp"

#include <cstdlib>
#include <iostream>
#include <mutex>

namespace cin::log {

namespace {

Level parse(const char* text) {
  if (!text) return Level::warn;
  const std::string_view v(text);
  if (v == "error") return Level::error;
  if (v == "warn" || v == "warning") return Level::warn;
  if (v == "info") return Level::info;
  if (v == "debug" || v == "trace") return Level::debug;
  return Level::warn;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(parse(std::getenv("CIN_LOG")))};
  return level;
}

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

constexpr const char* kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

Level threshold() { return static_cast<Level>(current().load()); }
void set_threshold(Level level) { current().store(static_cast<int>(level)); }
bool enabled(Level level) { return static_cast<int>(level) <= current().load(); }

void write(Level level, std::string_view message) {
  const std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "[" << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace cin::log
