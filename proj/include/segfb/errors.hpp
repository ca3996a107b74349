#pragma once

#include <stdexcept>
#include <string>

namespace segfb {

/// Coarse failure category. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Config,        ///< malformed or inconsistent input (exit 2)
  Convergence,   ///< an iteration did not reach its tolerance (exit 3)
  Precondition,  ///< an operation was called outside its domain (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorKind::Convergence, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

/// Gradient requested at a point where the profile is not differentiable.
class SingularEvaluation : public PreconditionError {
 public:
  explicit SingularEvaluation(const std::string& what) : PreconditionError(what) {}
};

/// Domain variation has no root in [-1, 1]: the flatness sandwich fails at that node.
class NoRootError : public PreconditionError {
 public:
  NoRootError(const std::string& what, std::size_t node) : PreconditionError(what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Convergence: return 3;
    case ErrorKind::Precondition: return 4;
  }
  return 1;
}

}  // namespace segfb
