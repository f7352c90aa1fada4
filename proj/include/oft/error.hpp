#pragma once

#include <stdexcept>
#include <string>

namespace oft {

// Process exit codes used by the command-line tool.
enum class ExitCode : int { kOk = 0, kConfig = 2, kData = 3, kInfeasible = 4 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration, malformed model files, invalid arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error(ExitCode::kConfig, what) {}
};

// Input data that cannot be processed.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

class SequencingError : public DataError {
 public:
  using DataError::DataError;
};

class InconsistentEvidenceError : public DataError {
 public:
  using DataError::DataError;
};

class UndefinedCorrelationError : public DataError {
 public:
  using DataError::DataError;
};

class SplitError : public DataError {
 public:
  using DataError::DataError;
};

class IngestionError : public DataError {
 public:
  using DataError::DataError;
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(ExitCode::kInfeasible, what) {}
};

}  // namespace oft
