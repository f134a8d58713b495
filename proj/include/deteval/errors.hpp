#pragma once

#include <stdexcept>
#include <string>

namespace deteval {

// Root of every error raised by the library. Callers that only need a
// diagnostic can catch this; callers that remediate catch the subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DETEVAL_DEFINE_ERROR(Name, Base)   \
  class Name : public Base {               \
   public:                                 \
    using Base::Base;                      \
  }

// core model
DETEVAL_DEFINE_ERROR(MismatchedIdentity, Error);
DETEVAL_DEFINE_ERROR(InvalidTimestamps, Error);
DETEVAL_DEFINE_ERROR(AbortedTrialError, Error);

// warden
DETEVAL_DEFINE_ERROR(UnknownClass, Error);
DETEVAL_DEFINE_ERROR(OverRelease, Error);

// orchestrator
DETEVAL_DEFINE_ERROR(ConfigError, Error);
DETEVAL_DEFINE_ERROR(ExperimentAborted, Error);

// sandbox
DETEVAL_DEFINE_ERROR(StageError, Error);
DETEVAL_DEFINE_ERROR(IllegalTransition, StageError);

// cost model
DETEVAL_DEFINE_ERROR(NonpositiveTe, Error);
DETEVAL_DEFINE_ERROR(LabelMismatch, Error);
DETEVAL_DEFINE_ERROR(NegativeRemainingTime, Error);
DETEVAL_DEFINE_ERROR(EmptyGrid, Error);

// io
DETEVAL_DEFINE_ERROR(IoFailure, Error);
DETEVAL_DEFINE_ERROR(SchemaError, Error);
DETEVAL_DEFINE_ERROR(ValidationError, Error);
DETEVAL_DEFINE_ERROR(UsageError, Error);

#undef DETEVAL_DEFINE_ERROR

/// A stage failed in the backend. Persistent faults recur on every retry of
/// the same stage within the same trial.
class StageFault : public StageError {
 public:
  StageFault(const std::string& what, bool persistent)
      : StageError(what), persistent_(persistent) {}
  bool persistent() const noexcept { return persistent_; }

 private:
  bool persistent_;
};

/// Parse failure with a location in the source document.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, std::size_t column,
             const std::string& what)
      : Error(file + ":" + std::to_string(line) + ":" +
              std::to_string(column) + ": " + what),
        file_(std::move(file)),
        line_(line),
        column_(column) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::size_t column_;
};

}  // namespace deteval
