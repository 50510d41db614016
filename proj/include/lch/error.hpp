#pragma once

#include <stdexcept>
#include <string>

namespace lch {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or argument-domain violation (bad mesh size, φ outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Two fields or a field and a mesh do not belong together.
class MeshMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Linear solve failed; `pivot` is the column at which factorization broke down
// (-1 when the failure was detected only from the residual).
class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& what, long pivot)
      : Error(what), pivot_(pivot) {}
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

// Newton iteration did not reach tolerance, or a line search could not
// produce an admissible iterate.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace lch
