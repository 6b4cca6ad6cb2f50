#ifndef TTW_ERRORS_HPP
#define TTW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ttw {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A phase-space point lies outside the open sector, on the guard band, or has r <= 0.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or a request that the current k mode cannot serve
/// (e.g. asking for C with irrational k).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// (E, A) does not describe a bounded torus.
class AdmissibilityError : public Error {
 public:
  using Error::Error;
};

/// Base for failures of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class StepFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ExhaustionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientSpanError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IllConditionedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateOrbitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GridTooSmallError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

}  // namespace ttw

#endif  // TTW_ERRORS_HPP
