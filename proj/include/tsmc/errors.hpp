#pragma once

#include <stdexcept>
#include <string>

namespace tsmc {

// Raised on malformed experiment configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on numerical failures: non-finite values, normalization drift,
// absolute-continuity violations (CLI exit code 3).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on file-system failures (CLI exit code 4).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tsmc
