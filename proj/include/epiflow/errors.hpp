#pragma once

#include <stdexcept>
#include <string>

namespace epiflow {

/// Base class of all toolkit errors.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad arguments, malformed configuration, inputs that violate a precondition.
/// CLI maps these to exit code 2.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Numerical failures: degenerate geometry, non-convergence, no model found.
/// CLI maps these to exit code 3.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Corrupt or unreadable data streams. CLI maps these to exit code 4.
class IoError : public Error {
public:
  using Error::Error;
};

// geometry
class ZeroTranslation : public NumericalError {
public:
  ZeroTranslation() : NumericalError("translation is (numerically) zero; fundamental matrix undefined") {}
};
class DegenerateLine : public NumericalError {
public:
  DegenerateLine() : NumericalError("epipolar line has vanishing normal (point at epipole)") {}
};

// flow_field
class OutOfBounds : public ValidationError {
public:
  explicit OutOfBounds(const std::string& what) : ValidationError(what) {}
};

// supervision
class EmptySupport : public NumericalError {
public:
  explicit EmptySupport(const std::string& term)
      : NumericalError("no pixel contributes to loss term '" + term + "'") {}
};

// synth_transform
class SamplingExhausted : public NumericalError {
public:
  SamplingExhausted() : NumericalError("exhausted 100 attempts to sample an invertible transform") {}
};
class NoConvergence : public NumericalError {
public:
  explicit NoConvergence(const std::string& what) : NumericalError(what) {}
};

// flow_optimizer
class NoLossEnabled : public ValidationError {
public:
  NoLossEnabled() : ValidationError("optimizer configured with no loss term enabled") {}
};
class DivergenceDetected : public NumericalError {
public:
  explicit DivergenceDetected(const std::string& what) : NumericalError(what) {}
};

// model_fit
class InsufficientMatches : public ValidationError {
public:
  explicit InsufficientMatches(const std::string& what) : ValidationError(what) {}
};
class NoModel : public NumericalError {
public:
  explicit NoModel(const std::string& what) : NumericalError(what) {}
};
class DegenerateConfiguration : public NumericalError {
public:
  explicit DegenerateConfiguration(const std::string& what) : NumericalError(what) {}
};
class CheiralityAmbiguous : public NumericalError {
public:
  CheiralityAmbiguous() : NumericalError("no pose candidate attains a strict cheirality majority") {}
};

// metrics
class EmptyMask : public ValidationError {
public:
  EmptyMask() : ValidationError("evaluation mask selects no pixel") {}
};
class EmptySet : public ValidationError {
public:
  EmptySet() : ValidationError("empty evaluation set") {}
};
class EmptyMatches : public ValidationError {
public:
  EmptyMatches() : ValidationError("empty match set") {}
};

// io
class BadMagic : public IoError {
public:
  explicit BadMagic(const std::string& what) : IoError(what) {}
};
class TruncatedPayload : public IoError {
public:
  explicit TruncatedPayload(const std::string& what) : IoError(what) {}
};
class NonPositiveDims : public IoError {
public:
  explicit NonPositiveDims(const std::string& what) : IoError(what) {}
};

}  // namespace epiflow
