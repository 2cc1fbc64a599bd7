#pragma once

#include <string>
#include <vector>

#include "paic/calculus.hpp"
#include "paic/model.hpp"

namespace paic {

struct ModeOptions {
  int max_iterations = 200;
  // Converged when ||grad||_inf <= grad_tol * max(1, |log posterior|).
  double grad_tol = 1e-8;
  // Total starts tried by find_posterior_mode: the data-driven point plus
  // model-supplied restart points.
  int restarts = 3;
  DiffConfig diff;
};

struct ModeResult {
  ParameterVector theta_hat;
  double logpost = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // -Hessian of log L + log pi at theta_hat, in the model's parameterization.
  Matrix neg_hessian;
  int gradient_fallbacks = 0;
  std::string message;
};

// Damped Newton ascent on log{L(theta|y) pi(theta)} with backtracking.
// Bounded coordinates are optimized on an unconstrained scale (log for a
// half-line); the objective itself is not changed, so the maximizer is the
// mode in the model's own parameterization.
ModeResult posterior_mode(const ModelDefinition& model, const ObservationSet& data,
                          const ParameterVector& init, const ModeOptions& opts = {});

// Runs posterior_mode from the model's initial point and restart points and
// keeps the best converged objective.
ModeResult find_posterior_mode(const ModelDefinition& model, const ObservationSet& data,
                               const ModeOptions& opts = {});

// Gaussian approximation N(theta_hat, (n J_n(theta_hat))^-1).
struct LaplaceApprox {
  Vector mean;
  Matrix covariance;
};

LaplaceApprox laplace_approx(const ModelDefinition& model, const ObservationSet& data,
                             const ModeResult& mode, const DiffConfig& cfg = {});

}  // namespace paic
