#include "marflow/core/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace marflow::log {
namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
}  // namespace

void set_level(Level l) { g_level = l; }
Level level() { return g_level; }

void write(Level l, std::string_view message) {
  if (l < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mutex);
  std::cerr << '[' << kNames[static_cast<int>(l)] << "] " << message << '\n';
}

}  // namespace marflow::log
