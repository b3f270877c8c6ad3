#pragma once

#include <cstddef>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mnl {

/// Error type thrown by every operation in the library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw error(msg); }

inline constexpr double k_eps = std::numeric_limits<double>::epsilon();

/// Log levels selected through the MNL_LOG_LEVEL environment variable.
enum class log_level { error = 0, info = 1, debug = 2 };

inline log_level current_log_level() {
    static const log_level lvl = [] {
        const char* env = std::getenv("MNL_LOG_LEVEL");
        if (env == nullptr) return log_level::info;
        const std::string s(env);
        if (s == "error") return log_level::error;
        if (s == "info") return log_level::info;
        if (s == "debug") return log_level::debug;
        return log_level::info;
    }();
    return lvl;
}

inline void log_msg(log_level lvl, const std::string& msg) {
    if (static_cast<int>(lvl) <= static_cast<int>(current_log_level())) {
        std::cerr << msg << "\n";
    }
}

inline void log_info(const std::string& msg) { log_msg(log_level::info, msg); }
inline void log_debug(const std::string& msg) { log_msg(log_level::debug, msg); }

}  // namespace mnl
