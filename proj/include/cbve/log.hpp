#pragma once

// Diagnostics on stderr, controlled by CBVE_LOG=debug|info.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string_view>

namespace cbve
{

enum class LogLevel
{
    off = 0,
    info = 1,
    debug = 2,
};

inline LogLevel log_level()
{
    static const LogLevel level = [] {
        const char* env = std::getenv("CBVE_LOG");
        if (!env)
            return LogLevel::off;
        const std::string_view v(env);
        if (v == "debug")
            return LogLevel::debug;
        if (v == "info")
            return LogLevel::info;
        return LogLevel::off;
    }();
    return level;
}

template <class... Args>
void log(LogLevel level, const Args&... args)
{
    if (level == LogLevel::off || static_cast<int>(level) > static_cast<int>(log_level()))
        return;
    std::ostringstream os;
    os << (level == LogLevel::debug ? "[cbve debug] " : "[cbve info] ");
    (os << ... << args);
    os << '\n';
    std::cerr << os.str();
}

} // namespace cbve
