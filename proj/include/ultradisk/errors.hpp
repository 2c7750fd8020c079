#pragma once

#include <stdexcept>
#include <string>

namespace ultradisk {

// Invalid argument (sizes, basis indices, physical parameters).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A linear solve or iteration failed (singular mode system, NaN, no convergence).
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File I/O failure; the message carries the offending path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ultradisk
