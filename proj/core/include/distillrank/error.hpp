#pragma once

#include <stdexcept>
#include <string>

namespace distillrank {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input data. Carries file/line context in the message.
struct ParseError : Error {
    using Error::Error;
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what) {}
};

/// Filesystem failures: missing files, unwritable paths.
struct IoError : Error {
    using Error::Error;
};

/// Invalid configuration values (out-of-range fields, bad enums).
struct ConfigError : Error {
    using Error::Error;
};

/// Remote service failures that persist after retries.
struct RemoteError : Error {
    using Error::Error;
};

}  // namespace distillrank
