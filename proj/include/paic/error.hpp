#pragma once

#include <stdexcept>
#include <string>

namespace paic {

enum class ErrorKind {
  Validation,
  Io,
  NonFinite,
  ImproperPrior,
  IllConditioned,
  NotPositiveDefinite,
  SingularHessian,
  UnsupportedModel,
  NonConvergence,
};

const char* to_string(ErrorKind kind);

// Every failure in the library is reported through this type. Validation and
// Io kinds map to CLI exit code 2, everything else is a numerical failure (3).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool is_validation() const noexcept {
    return kind_ == ErrorKind::Validation || kind_ == ErrorKind::Io;
  }

 private:
  ErrorKind kind_;
};

}  // namespace paic
