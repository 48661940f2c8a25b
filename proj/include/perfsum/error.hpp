#pragma once

#include <stdexcept>
#include <string>

namespace perfsum {

/// Raised when an argument lies outside the domain of an operation
/// (k out of range, covariance on a singleton set, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Malformed or unusable input data.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// The exact oracles refuse work above their configured caps.
class InfeasibleError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace perfsum
