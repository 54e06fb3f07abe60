#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <string>

// Minimal stderr logger. Level comes from the SPLITPIPE_LOG environment
// variable (debug|info|warn|error), default warn. Data output goes to stdout
// elsewhere; this never touches stdout.
namespace splitpipe::log {

enum class Level : int { debug = 0, info = 1, warn = 2, error = 3 };

inline Level& threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("SPLITPIPE_LOG");
        if (!env) return Level::warn;
        if (!std::strcmp(env, "debug")) return Level::debug;
        if (!std::strcmp(env, "info")) return Level::info;
        if (!std::strcmp(env, "error")) return Level::error;
        return Level::warn;
    }();
    return lvl;
}

inline std::mutex& mu() {
    static std::mutex m;
    return m;
}

template <typename... Args>
inline void emit(Level lvl, const char* tag, const char* fmt, Args... args) {
    if ((int)lvl < (int)threshold()) return;
    std::lock_guard<std::mutex> lock(mu());
    std::fprintf(stderr, "[%s] ", tag);
    std::fprintf(stderr, fmt, args...);
    std::fputc('\n', stderr);
}

inline void emit(Level lvl, const char* tag, const char* msg) {
    emit(lvl, tag, "%s", msg);
}

#define SPLITPIPE_LOG_DEBUG(...) ::splitpipe::log::emit(::splitpipe::log::Level::debug, "debug", __VA_ARGS__)
#define SPLITPIPE_LOG_INFO(...) ::splitpipe::log::emit(::splitpipe::log::Level::info, "info", __VA_ARGS__)
#define SPLITPIPE_LOG_WARN(...) ::splitpipe::log::emit(::splitpipe::log::Level::warn, "warn", __VA_ARGS__)
#define SPLITPIPE_LOG_ERROR(...) ::splitpipe::log::emit(::splitpipe::log::Level::error, "error", __VA_ARGS__)

}  // namespace splitpipe::log
