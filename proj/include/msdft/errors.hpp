#pragma once

#include <stdexcept>
#include <string>

namespace msdft {

/// Shapes that cannot be combined (mismatched extents, bad broadcast, bad axis).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// NaN / infinity where finite values are required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an API precondition (non-scalar loss, odd patch length, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Invalid hyperparameter or configuration value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed file content (CSV, checkpoint).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A series is too short for the requested window or transform.
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace msdft
