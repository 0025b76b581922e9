#pragma once

#include <stdexcept>
#include <string>

namespace penalflow {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  Success = 0,
  Configuration = 2,
  Solver = 3,
  Io = 4,
};

/// Root of the library's exception hierarchy. Every error knows which
/// CLI exit code it maps to and carries a short machine-parsable kind.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what, ExitCode code)
      : std::runtime_error(what), kind_(std::move(kind)), code_(code) {}

  const std::string& kind() const noexcept { return kind_; }
  ExitCode exit_code() const noexcept { return code_; }

 private:
  std::string kind_;
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error("config", what, ExitCode::Configuration) {}
};

class MeshingError : public Error {
 public:
  explicit MeshingError(const std::string& what)
      : Error("meshing", what, ExitCode::Configuration) {}
};

class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what)
      : Error("invalid-input", what, ExitCode::Configuration) {}
};

class ConstraintConflict : public Error {
 public:
  explicit ConstraintConflict(const std::string& what)
      : Error("constraint-conflict", what, ExitCode::Configuration) {}
};

class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& what)
      : Error("insufficient-data", what, ExitCode::Configuration) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error("numeric", what, ExitCode::Solver) {}
};

class LinearSolverError : public Error {
 public:
  explicit LinearSolverError(const std::string& what)
      : Error("linear-solver", what, ExitCode::Solver) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what)
      : Error("solver", what, ExitCode::Solver) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error("io", what, ExitCode::Io) {}
};

}  // namespace penalflow
