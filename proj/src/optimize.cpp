#include "paic/optimize.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "paic/error.hpp"
#include "paic/info_matrices.hpp"

namespace paic {

namespace {

// Maps between model coordinates theta and unconstrained coordinates u.
class BoxTransform {
 public:
  explicit BoxTransform(const ModelDefinition& model) : support_(model.support) {
    support_.resize(model.dim);
  }

  Vector to_unconstrained(const Vector& theta) const {
    Vector u(theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      const auto& s = support_[static_cast<std::size_t>(j)];
      const bool lo = std::isfinite(s.lower), hi = std::isfinite(s.upper);
      if (lo && hi) {
        const double q = (theta[j] - s.lower) / (s.upper - s.lower);
        u[j] = std::log(q / (1.0 - q));
      } else if (lo) {
        u[j] = std::log(theta[j] - s.lower);
      } else if (hi) {
        u[j] = std::log(s.upper - theta[j]);
      } else {
        u[j] = theta[j];
      }
    }
    return u;
  }

  // theta(u), d theta/du and d^2 theta/du^2.
  void from_unconstrained(const Vector& u, Vector& theta, Vector& d1, Vector& d2) const {
    theta.resize(u.size());
    d1.resize(u.size());
    d2.resize(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const auto& s = support_[static_cast<std::size_t>(j)];
      const bool lo = std::isfinite(s.lower), hi = std::isfinite(s.upper);
      if (lo && hi) {
        const double w = s.upper - s.lower;
        const double q = 1.0 / (1.0 + std::exp(-u[j]));
        theta[j] = s.lower + w * q;
        d1[j] = w * q * (1.0 - q);
        d2[j] = d1[j] * (1.0 - 2.0 * q);
      } else if (lo) {
        const double e = std::exp(u[j]);
        theta[j] = s.lower + e;
        d1[j] = d2[j] = e;
      } else if (hi) {
        const double e = std::exp(u[j]);
        theta[j] = s.upper - e;
        d1[j] = d2[j] = -e;
      } else {
        theta[j] = u[j];
        d1[j] = 1.0;
        d2[j] = 0.0;
      }
    }
  }

 private:
  std::vector<Interval> support_;
};

double safe_logpost(const ModelDefinition& model, const ObservationSet& data,
                    const Vector& theta) {
  if (!in_support(model, theta)) return -std::numeric_limits<double>::infinity();
  try {
    const double v = logpost_unnorm(model, data, theta);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Cholesky of a symmetric matrix, retried once with ridge 1e-8 * |trace| / p.
bool factor_with_ridge(const Matrix& A, Eigen::LLT<Matrix>& llt) {
  llt.compute(A);
  if (llt.info() == Eigen::Success) return true;
  const double p = static_cast<double>(A.rows());
  const double ridge = 1e-8 * std::max(std::abs(A.trace()), 1.0) / p;
  llt.compute(A + ridge * Matrix::Identity(A.rows(), A.cols()));
  return llt.info() == Eigen::Success;
}

}  // namespace

ModeResult posterior_mode(const ModelDefinition& model, const ObservationSet& data,
                          const ParameterVector& init, const ModeOptions& opts) {
  check_parameter(model, init);
  check_data(model, data);
  const BoxTransform tr(model);
  ModeResult res;

  Vector u = tr.to_unconstrained(init);
  Vector theta, d1, d2;
  tr.from_unconstrained(u, theta, d1, d2);
  double f = safe_logpost(model, data, theta);
  if (!std::isfinite(f)) {
    throw Error(ErrorKind::NonFinite, "log posterior is not finite at the initial point");
  }

  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    const Vector g = logpost_grad(model, data, theta, opts.diff);
    res.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= opts.grad_tol * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }
    const Matrix H = logpost_hess(model, data, theta, opts.diff);
    const Vector gu = d1.cwiseProduct(g);
    Matrix Hu = d1.asDiagonal() * H * d1.asDiagonal();
    Hu.diagonal() += d2.cwiseProduct(g);

    Vector dir;
    Eigen::LLT<Matrix> llt;
    const Matrix A = -0.5 * (Hu + Hu.transpose());
    if (factor_with_ridge(A, llt)) dir = llt.solve(gu);
    if (dir.size() == 0 || !dir.allFinite() || gu.dot(dir) <= 0.0) {
      // Not an ascent direction: steepest ascent with a bounded first step.
      dir = gu / std::max(1.0, gu.norm());
      ++res.gradient_fallbacks;
    }

    double step = 1.0;
    const double slope = gu.dot(dir);
    bool accepted = false;
    Vector theta_new, d1_new, d2_new;
    for (int k = 0; k < 60; ++k) {
      const Vector u_new = u + step * dir;
      tr.from_unconstrained(u_new, theta_new, d1_new, d2_new);
      const double f_new = safe_logpost(model, data, theta_new);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * slope) {
        u = u_new;
        theta = theta_new;
        d1 = d1_new;
        d2 = d2_new;
        f = f_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.message = "line search could not improve the objective";
      break;
    }
  }
  if (!res.converged && res.message.empty()) {
    res.message = "reached " + std::to_string(opts.max_iterations) + " iterations";
  }
  res.theta_hat = theta;
  res.logpost = f;
  res.neg_hessian = -logpost_hess(model, data, theta, opts.diff);
  if (res.converged) {
    Eigen::LLT<Matrix> llt(res.neg_hessian);
    if (llt.info() != Eigen::Success) {
      Eigen::LLT<Matrix> retry;
      if (!factor_with_ridge(res.neg_hessian, retry)) {
        throw Error(ErrorKind::SingularHessian,
                    "negative Hessian at the stationary point is not positive definite");
      }
    }
  }
  return res;
}

ModeResult find_posterior_mode(const ModelDefinition& model, const ObservationSet& data,
                               const ModeOptions& opts) {
  check_data(model, data);
  if (!model.initial_point) {
    throw Error(ErrorKind::Validation, "model " + model.name + " has no initial point");
  }
  std::vector<ParameterVector> starts{model.initial_point(data)};
  if (model.restart_points) {
    for (auto& s : model.restart_points(data)) {
      if (static_cast<int>(starts.size()) >= opts.restarts) break;
      starts.push_back(std::move(s));
    }
  }
  ModeResult best;
  bool have = false;
  for (const auto& s : starts) {
    ModeResult r = posterior_mode(model, data, s, opts);
    const bool better = !have || (r.converged && !best.converged) ||
                        (r.converged == best.converged && r.logpost > best.logpost);
    if (better) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

LaplaceApprox laplace_approx(const ModelDefinition& model, const ObservationSet& data,
                             const ModeResult& mode, const DiffConfig& cfg) {
  if (!mode.converged) {
    throw Error(ErrorKind::NonConvergence, "Laplace approximation needs a converged mode");
  }
  const double n = static_cast<double>(data.size());
  const Matrix precision = n * compute_Jn(model, data, mode.theta_hat, cfg);
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(precision);
    std::ostringstream os;
    os << "n*J_n is not positive definite; eigenvalues:";
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) os << ' ' << es.eigenvalues()[k];
    throw Error(ErrorKind::NotPositiveDefinite, os.str());
  }
  Matrix cov = llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
  cov = 0.5 * (cov + cov.transpose());
  return {mode.theta_hat, cov};
}

}  // namespace paic
