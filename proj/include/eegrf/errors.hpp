#pragma once

#include <stdexcept>
#include <string>

namespace eegrf {

// Base of every error raised by the library. Each subclass maps to its own
// process exit code in the CLI (see exit_code_for).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// File content does not match its declared format (header fields, payload length).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input carrying invalid values (NaN, duplicate ids, wrong counts).
class DataError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Numerically unusable configuration, e.g. an unstable filter design.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Classifier training is impossible with the given examples.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined for the input (e.g. AUC with a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// An annotation log contradicts itself (click on an image never shown, ...).
class LogConsistencyError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kIo = 3,
  kFormat = 4,
  kData = 5,
  kPrecondition = 6,
  kNumeric = 7,
  kTraining = 8,
  kUndefinedMetric = 9,
  kLogConsistency = 10,
};

inline ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e)) return ExitCode::kIo;
  if (dynamic_cast<const FormatError*>(&e)) return ExitCode::kFormat;
  if (dynamic_cast<const DataError*>(&e)) return ExitCode::kData;
  if (dynamic_cast<const PreconditionError*>(&e)) return ExitCode::kPrecondition;
  if (dynamic_cast<const NumericError*>(&e)) return ExitCode::kNumeric;
  if (dynamic_cast<const TrainingError*>(&e)) return ExitCode::kTraining;
  if (dynamic_cast<const UndefinedMetricError*>(&e)) return ExitCode::kUndefinedMetric;
  if (dynamic_cast<const LogConsistencyError*>(&e)) return ExitCode::kLogConsistency;
  return ExitCode::kUnexpected;
}

}  // namespace eegrf
