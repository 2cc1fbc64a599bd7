#pragma once

#include <cstddef>
#include <functional>

#include "paic/model.hpp"
#include "paic/types.hpp"

namespace paic {

struct DiffConfig {
  // Step for central differences of a function, scaled by max(1, |theta_j|).
  // Roughly the cube root of double epsilon.
  double rel_step = 6.06e-6;
  // Outer step used when a Hessian is built from finite-difference gradients
  // (fourth root of epsilon). Gradient-difference Hessians from an analytic
  // gradient use rel_step.
  double hessian_outer_step = 1.22e-4;
};

using ScalarFn = std::function<double(const Vector&)>;
using GradientFn = std::function<Vector(const Vector&)>;

// Central-difference gradient. Throws NonFinite naming the coordinate and step.
Vector grad_fd(const ScalarFn& f, const Vector& theta, const DiffConfig& cfg = {});

// Hessian from central differences of a gradient: 2p gradient calls, then
// symmetrized as (H + H')/2.
Matrix hess_from_grad(const GradientFn& grad, const Vector& theta, double rel_step);

// Hessian of f using finite-difference gradients (nested central scheme).
Matrix hess_fd(const ScalarFn& f, const Vector& theta, const DiffConfig& cfg = {});

// Gradient / Hessian of the per-observation term
// log g(y_i|theta) + (1/n) log pi(theta). Analytic when the model provides it,
// finite differences otherwise.
Vector observation_term_grad(const ModelDefinition& model, const ObservationSet& data,
                             const ParameterVector& theta, std::size_t i,
                             const DiffConfig& cfg = {});
Matrix observation_term_hess(const ModelDefinition& model, const ObservationSet& data,
                             const ParameterVector& theta, std::size_t i,
                             const DiffConfig& cfg = {});

// Gradient / Hessian of log L(theta|y) + log pi(theta).
Vector logpost_grad(const ModelDefinition& model, const ObservationSet& data,
                    const ParameterVector& theta, const DiffConfig& cfg = {});
Matrix logpost_hess(const ModelDefinition& model, const ObservationSet& data,
                    const ParameterVector& theta, const DiffConfig& cfg = {});

struct DerivativeCheck {
  double max_rel_err = 0.0;
  std::size_t worst_observation = 0;
  std::size_t worst_coordinate = 0;
  // Column of the worst entry; only meaningful for Hessian checks.
  std::size_t worst_column = 0;
  double tolerance = 1e-5;
  bool passed = true;
};

// |a - b| / max(1, |a|, |b|).
double scaled_error(double a, double b);

// Analytic vs finite-difference gradient of every per-observation term.
// Requires analytic derivatives (Validation otherwise).
DerivativeCheck check_gradient(const ModelDefinition& model, const ObservationSet& data,
                               const ParameterVector& theta, const DiffConfig& cfg = {},
                               double tolerance = 1e-5);

// Analytic Hessian vs central differences of the analytic gradient.
DerivativeCheck check_hessian(const ModelDefinition& model, const ObservationSet& data,
                              const ParameterVector& theta, const DiffConfig& cfg = {},
                              double tolerance = 1e-5);

}  // namespace paic
