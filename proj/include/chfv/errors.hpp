#pragma once

#include <stdexcept>
#include <string>

namespace chfv {

/// Invalid mesh input: bad construction arguments, malformed files, or a
/// triangulation that violates the orthogonality requirements.
class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable data reaching the assembly routines.
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A functional evaluated outside its domain (e.g. log of a non-positive
/// volume fraction).
class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear algebra failure inside a nonlinear solve.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File persistence failures (VTK, CSV, checkpoints).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chfv
