#include "loopwbc/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace loopwbc::log {

namespace {

Level parse_env() {
  const char* env = std::getenv("LOOPWBC_LOG");
  if (env == nullptr) return Level::warn;
  if (std::strcmp(env, "error") == 0) return Level::error;
  if (std::strcmp(env, "warn") == 0) return Level::warn;
  if (std::strcmp(env, "info") == 0) return Level::info;
  if (std::strcmp(env, "debug") == 0) return Level::debug;
  return Level::warn;
}

Level g_threshold = parse_env();

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    case Level::debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() { return g_threshold; }

void set_threshold(Level lvl) { g_threshold = lvl; }

void write(Level lvl, const std::string& msg) {
  if (static_cast<int>(lvl) > static_cast<int>(g_threshold)) return;
  std::fprintf(stderr, "[loopwbc %s] %s\n", tag(lvl), msg.c_str());
}

}  // namespace loopwbc::log
