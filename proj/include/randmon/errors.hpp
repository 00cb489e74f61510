#pragma once

#include <stdexcept>
#include <string>

namespace randmon {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failures: exit code 3 in the CLI.
class NumericalError : public Error {
public:
    using Error::Error;
};

class NonConvergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularInnovation : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyAfterZeroRemoval : public Error {
public:
    using Error::Error;
};

class DegenerateWindow : public Error {
public:
    using Error::Error;
};

class InvalidBias : public Error {
public:
    using Error::Error;
};

class InfeasibleBudget : public Error {
public:
    using Error::Error;
};

class InvalidParams : public Error {
public:
    using Error::Error;
};

class InsufficientEnsemble : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration problems: exit code 2 in the CLI.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class ValidationError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

}  // namespace randmon
