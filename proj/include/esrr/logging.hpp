#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace esrr::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level from ESRR_LOG (error|warn|info|debug), default warn. Cached once.
inline Level threshold() {
  static Level lvl = [] {
    const char* env = std::getenv("ESRR_LOG");
    if (!env) return Level::Warn;
    if (std::strcmp(env, "error") == 0) return Level::Error;
    if (std::strcmp(env, "warn") == 0) return Level::Warn;
    if (std::strcmp(env, "info") == 0) return Level::Info;
    if (std::strcmp(env, "debug") == 0) return Level::Debug;
    return Level::Warn;
  }();
  return lvl;
}

inline void write(Level lvl, const std::string& msg) {
  if (lvl > threshold()) return;
  const char* tag = lvl == Level::Error  ? "error"
                    : lvl == Level::Warn ? "warn"
                    : lvl == Level::Info ? "info"
                                         : "debug";
  std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void error(const std::string& m) { write(Level::Error, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void debug(const std::string& m) { write(Level::Debug, m); }

}  // namespace esrr::log
