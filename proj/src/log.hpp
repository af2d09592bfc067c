#pragma once

#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace drf {

// Verbosity from DRF_LOG: error, warn (default), info, debug.
enum class LogLevel : int { error = 0, warn = 1, info = 2, debug = 3 };

inline LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("DRF_LOG");
        if (!env) return LogLevel::warn;
        if (std::strcmp(env, "error") == 0) return LogLevel::error;
        if (std::strcmp(env, "info") == 0) return LogLevel::info;
        if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
        return LogLevel::warn;
    }();
    return level;
}

inline void log_at(LogLevel lvl, const char* tag, const char* fmt, va_list args) {
    if (int(lvl) > int(log_level())) return;
    std::fprintf(stderr, "[%s] ", tag);
    std::vfprintf(stderr, fmt, args);
    std::fputc('\n', stderr);
}

#define DRF_LOG_FN(name, level, tag)                  \
    inline void name(const char* fmt, ...) {          \
        va_list args;                                 \
        va_start(args, fmt);                          \
        log_at(level, tag, fmt, args);                \
        va_end(args);                                 \
    }

DRF_LOG_FN(log_error, LogLevel::error, "error")
DRF_LOG_FN(log_warn, LogLevel::warn, "warn")
DRF_LOG_FN(log_info, LogLevel::info, "info")
DRF_LOG_FN(log_debug, LogLevel::debug, "debug")

#undef DRF_LOG_FN

}  // namespace drf
