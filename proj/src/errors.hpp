#pragma once

#include <stdexcept>
#include <string>

namespace drf {

// Error categories map onto the CLI / C API status codes:
//   2 config, 3 numeric, 4 io, 5 internal contract violation.
enum class ErrorCode : int {
    config   = 2,
    numeric  = 3,
    io       = 4,
    internal = 5,
};

struct Error : std::runtime_error {
    Error(ErrorCode c, const std::string& what) : std::runtime_error(what), code(c) {}
    ErrorCode code;
};

// Bad configuration values; the message names the offending field.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorCode::config, what) {}
};

// Schedule-level inconsistencies (misordered steps, ratios outside (0,1]).
struct ScheduleError : ConfigError {
    explicit ScheduleError(const std::string& what) : ConfigError(what) {}
};

// Non-finite values, singular coefficients, training divergence.
struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorCode::numeric, what) {}
};

struct SingularityError : NumericError {
    explicit SingularityError(const std::string& what) : NumericError(what) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorCode::io, what) {}
};

// Violated call contracts (shape mismatches, missing recursion state).
struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error(ErrorCode::internal, what) {}
};

struct StateError : Error {
    explicit StateError(const std::string& what) : Error(ErrorCode::internal, what) {}
};

}  // namespace drf
