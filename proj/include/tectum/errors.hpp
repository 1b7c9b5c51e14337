#pragma once

#include <stdexcept>
#include <string>

namespace tectum {

// Error taxonomy. The CLI maps each kind onto its own exit code.

/// Invalid user configuration or arguments.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (matrix, group, table files).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or other numeric breakdowns during simulation/training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tectum
