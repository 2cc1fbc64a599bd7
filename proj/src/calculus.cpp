#include "paic/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "paic/error.hpp"

namespace paic {

namespace {

double step_for(double x, double rel) { return rel * std::max(1.0, std::abs(x)); }

[[noreturn]] void non_finite(Eigen::Index j, double h) {
  std::ostringstream os;
  os << "non-finite evaluation at coordinate " << j << " with step " << h;
  throw Error(ErrorKind::NonFinite, os.str());
}

Vector term_grad_analytic(const ModelDefinition& model, const ObservationSet& data,
                          const ParameterVector& theta, std::size_t i) {
  const double n = static_cast<double>(data.size());
  return model.loglik_grad(theta, data, i) + model.logprior_grad(theta) / n;
}

}  // namespace

Vector grad_fd(const ScalarFn& f, const Vector& theta, const DiffConfig& cfg) {
  if (!(cfg.rel_step > 0)) throw Error(ErrorKind::Validation, "rel_step must be positive");
  Vector g(theta.size());
  Vector x = theta;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = step_for(theta[j], cfg.rel_step);
    x[j] = theta[j] + h;
    const double fp = f(x);
    x[j] = theta[j] - h;
    const double fm = f(x);
    x[j] = theta[j];
    if (!std::isfinite(fp) || !std::isfinite(fm)) non_finite(j, h);
    // The realized step (x+h)-(x-h) can differ from 2h in floating point.
    const double span = (theta[j] + h) - (theta[j] - h);
    g[j] = (fp - fm) / span;
  }
  return g;
}

Matrix hess_from_grad(const GradientFn& grad, const Vector& theta, double rel_step) {
  const Eigen::Index p = theta.size();
  Matrix H(p, p);
  Vector x = theta;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double h = step_for(theta[j], rel_step);
    x[j] = theta[j] + h;
    const Vector gp = grad(x);
    x[j] = theta[j] - h;
    const Vector gm = grad(x);
    x[j] = theta[j];
    if (!gp.allFinite() || !gm.allFinite()) non_finite(j, h);
    H.col(j) = (gp - gm) / ((theta[j] + h) - (theta[j] - h));
  }
  return 0.5 * (H + H.transpose());
}

Matrix hess_fd(const ScalarFn& f, const Vector& theta, const DiffConfig& cfg) {
  const GradientFn g = [&](const Vector& x) { return grad_fd(f, x, cfg); };
  return hess_from_grad(g, theta, cfg.hessian_outer_step);
}

Vector observation_term_grad(const ModelDefinition& model, const ObservationSet& data,
                             const ParameterVector& theta, std::size_t i,
                             const DiffConfig& cfg) {
  if (model.has_analytic_grad()) return term_grad_analytic(model, data, theta, i);
  return grad_fd([&](const Vector& x) { return observation_term(model, data, x, i); }, theta,
                 cfg);
}

Matrix observation_term_hess(const ModelDefinition& model, const ObservationSet& data,
                             const ParameterVector& theta, std::size_t i,
                             const DiffConfig& cfg) {
  const double n = static_cast<double>(data.size());
  if (model.has_analytic_hess()) {
    return model.loglik_hess(theta, data, i) + model.logprior_hess(theta) / n;
  }
  if (model.has_analytic_grad()) {
    return hess_from_grad(
        [&](const Vector& x) { return term_grad_analytic(model, data, x, i); }, theta,
        cfg.rel_step);
  }
  return hess_fd([&](const Vector& x) { return observation_term(model, data, x, i); }, theta,
                 cfg);
}

Vector logpost_grad(const ModelDefinition& model, const ObservationSet& data,
                    const ParameterVector& theta, const DiffConfig& cfg) {
  if (model.has_analytic_grad()) {
    Vector g = model.logprior_grad(theta);
    for (std::size_t i = 0; i < data.size(); ++i) g += model.loglik_grad(theta, data, i);
    return g;
  }
  return grad_fd([&](const Vector& x) { return logpost_unnorm(model, data, x); }, theta, cfg);
}

Matrix logpost_hess(const ModelDefinition& model, const ObservationSet& data,
                    const ParameterVector& theta, const DiffConfig& cfg) {
  if (model.has_analytic_hess()) {
    Matrix H = model.logprior_hess(theta);
    for (std::size_t i = 0; i < data.size(); ++i) H += model.loglik_hess(theta, data, i);
    return 0.5 * (H + H.transpose());
  }
  if (model.has_analytic_grad()) {
    return hess_from_grad([&](const Vector& x) { return logpost_grad(model, data, x, cfg); },
                          theta, cfg.rel_step);
  }
  return hess_fd([&](const Vector& x) { return logpost_unnorm(model, data, x); }, theta, cfg);
}

double scaled_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

DerivativeCheck check_gradient(const ModelDefinition& model, const ObservationSet& data,
                               const ParameterVector& theta, const DiffConfig& cfg,
                               double tolerance) {
  if (!model.has_analytic_grad()) {
    throw Error(ErrorKind::Validation, "model " + model.name + " has no analytic gradient");
  }
  DerivativeCheck report;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector analytic = term_grad_analytic(model, data, theta, i);
    const Vector numeric = grad_fd(
        [&](const Vector& x) { return observation_term(model, data, x, i); }, theta, cfg);
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const double e = scaled_error(analytic[j], numeric[j]);
      if (e > report.max_rel_err) {
        report.max_rel_err = e;
        report.worst_observation = i;
        report.worst_coordinate = static_cast<std::size_t>(j);
      }
    }
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

DerivativeCheck check_hessian(const ModelDefinition& model, const ObservationSet& data,
                              const ParameterVector& theta, const DiffConfig& cfg,
                              double tolerance) {
  if (!model.has_analytic_hess() || !model.has_analytic_grad()) {
    throw Error(ErrorKind::Validation, "model " + model.name + " has no analytic Hessian");
  }
  DerivativeCheck report;
  report.tolerance = tolerance;
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Matrix analytic = model.loglik_hess(theta, data, i) + model.logprior_hess(theta) / n;
    const Matrix numeric = hess_from_grad(
        [&](const Vector& x) { return term_grad_analytic(model, data, x, i); }, theta,
        cfg.rel_step);
    for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
      for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
        const double e = scaled_error(analytic(r, c), numeric(r, c));
        if (e > report.max_rel_err) {
          report.max_rel_err = e;
          report.worst_observation = i;
          report.worst_coordinate = static_cast<std::size_t>(r);
          report.worst_column = static_cast<std::size_t>(c);
        }
      }
    }
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace paic
