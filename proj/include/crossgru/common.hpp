#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace crossgru {

// Error taxonomy maps onto the CLI exit-code contract:
// ConfigError/DataError -> exit 1, NumericError (and everything else) -> exit 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

// Diagnostics go to stderr so files and stdout stay reproducible.
inline void warn(const std::string& msg) {
    std::fprintf(stderr, "warning: %s\n", msg.c_str());
}

inline constexpr int kTradingDaysPerYear = 252;

} // namespace crossgru
