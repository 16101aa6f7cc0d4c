#pragma once

#include <stdexcept>
#include <string>

namespace tfl {

/// Operand shapes do not line up (matrix product, parameter trees, windows).
class ShapeError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/// Configuration values that are invalid or contradict each other.
class ConfigError : public std::invalid_argument {
public:
	using std::invalid_argument::invalid_argument;
};

/// Input data that cannot be used: unparseable files, series too short, IO failures.
class DataError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

} // namespace tfl
