#pragma once

#include <stdexcept>
#include <string>

namespace qkdcs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain where a function is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Configuration is structurally invalid or cannot be parsed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IntegrationNotConverged : public Error {
 public:
  using Error::Error;
};

/// Bounds and overlap tables disagree on the correlation parameters they were built for.
class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

class MissingHistory : public Error {
 public:
  using Error::Error;
};

/// The candidate stage could not produce a point satisfying all constraints.
class NoFeasibleCandidate : public Error {
 public:
  using Error::Error;
};

class TooManyVariables : public Error {
 public:
  using Error::Error;
};

/// The certification LP failed. Infeasibility here indicates a construction bug,
/// since the physical point always satisfies the relaxed constraints.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace qkdcs
