#pragma once

#include <stdexcept>
#include <string>

namespace rhogap {

// Bad arguments: dimension mismatches, violated preconditions on scalars.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Configuration problems (unknown keys, out-of-range values). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Insufficient or malformed data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorization failures, divergence, singular decoupling. CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

// A performance specification that cannot be met at a state regardless of data.
class SpecInfeasibleError : public DomainError {
 public:
  using DomainError::DomainError;
};

class SingularDecouplingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SignViolationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DataGenerationError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rhogap
