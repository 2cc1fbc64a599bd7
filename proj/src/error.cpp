#include "paic/error.hpp"

namespace paic {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::Io: return "Io";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ImproperPrior: return "ImproperPrior";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::SingularHessian: return "SingularHessian";
    case ErrorKind::UnsupportedModel: return "UnsupportedModel";
    case ErrorKind::NonConvergence: return "NonConvergence";
  }
  return "Unknown";
}

}  // namespace paic
