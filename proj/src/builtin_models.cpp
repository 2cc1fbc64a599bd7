#include "paic/builtin_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "paic/error.hpp"

namespace paic {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

}  // namespace

double log_binomial_coefficient(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log1p_exp(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double inv_logit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double binomial_logpmf_logit(double y, int trials, double logit_p) {
  const int k = static_cast<int>(y);
  return log_binomial_coefficient(trials, k) + y * logit_p - trials * log1p_exp(logit_p);
}

double scaled_inv_chi2_logpdf(double x, double df, double scale) {
  const double h = 0.5 * df;
  return h * std::log(h) - std::lgamma(h) + h * std::log(scale) - (h + 1.0) * std::log(x) -
         df * scale / (2.0 * x);
}

double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var)) - d * d / (2.0 * var);
}

// ---------------------------------------------------------------------------
// Conjugate normal

void ConjugateNormalModel::validate() const {
  if (!(sigma_A2 > 0) || !std::isfinite(sigma_A2)) {
    throw Error(ErrorKind::Validation, "sigma_A2 must be positive and finite");
  }
  if (tau02 && (!(*tau02 > 0) || !std::isfinite(*tau02))) {
    throw Error(ErrorKind::Validation, "tau02 must be positive and finite");
  }
  if (!std::isfinite(mu0)) throw Error(ErrorKind::Validation, "mu0 must be finite");
}

ConjugatePosterior conjugate_posterior(const ConjugateNormalModel& model,
                                       std::span<const double> y) {
  model.validate();
  const double n = static_cast<double>(y.size());
  const double sum = std::accumulate(y.begin(), y.end(), 0.0);
  const double prior_prec = model.flat() ? 0.0 : 1.0 / *model.tau02;
  const double prior_term = model.flat() ? 0.0 : model.mu0 / *model.tau02;
  const double prec = prior_prec + n / model.sigma_A2;
  if (!(prec > 0)) {
    throw Error(ErrorKind::Validation,
                "flat-prior normal posterior needs at least one observation");
  }
  return {(prior_term + sum / model.sigma_A2) / prec, 1.0 / prec};
}

ConjugatePosterior conjugate_posterior(const ConjugateNormalModel& model,
                                       const ObservationSet& data) {
  return conjugate_posterior(model, std::span<const double>(data.values()));
}

ModelDefinition ConjugateNormalModel::definition() const {
  validate();
  const ConjugateNormalModel m = *this;
  ModelDefinition def;
  def.name = flat() ? "normal-flat" : "normal";
  def.dim = 1;
  def.prior_proper = !flat();
  def.support = {Interval{}};

  def.loglik_i = [m](const ParameterVector& th, const ObservationSet& d, std::size_t i) {
    return normal_logpdf(d.y(i), th[0], m.sigma_A2);
  };
  def.loglik_grad = [m](const ParameterVector& th, const ObservationSet& d, std::size_t i) {
    Vector g(1);
    g[0] = (d.y(i) - th[0]) / m.sigma_A2;
    return g;
  };
  def.loglik_hess = [m](const ParameterVector&, const ObservationSet&, std::size_t) {
    Matrix h(1, 1);
    h(0, 0) = -1.0 / m.sigma_A2;
    return h;
  };
  if (flat()) {
    def.logprior = [](const ParameterVector&) { return 0.0; };
    def.logprior_grad = [](const ParameterVector&) { return Vector::Zero(1).eval(); };
    def.logprior_hess = [](const ParameterVector&) { return Matrix::Zero(1, 1).eval(); };
  } else {
    const double t2 = *tau02;
    def.logprior = [m, t2](const ParameterVector& th) {
      return normal_logpdf(th[0], m.mu0, t2);
    };
    def.logprior_grad = [m, t2](const ParameterVector& th) {
      Vector g(1);
      g[0] = (m.mu0 - th[0]) / t2;
      return g;
    };
    def.logprior_hess = [t2](const ParameterVector&) {
      Matrix h(1, 1);
      h(0, 0) = -1.0 / t2;
      return h;
    };
  }
  def.initial_point = [](const ObservationSet& d) {
    ParameterVector th(1);
    th[0] = d.size() == 0 ? 0.0
                          : std::accumulate(d.values().begin(), d.values().end(), 0.0) /
                                static_cast<double>(d.size());
    return th;
  };
  def.check_data = [m](const ObservationSet& d) {
    if (m.flat() && d.size() == 0) {
      throw Error(ErrorKind::Validation, "flat-prior normal model needs data");
    }
  };
  return def;
}

// ---------------------------------------------------------------------------
// Hierarchical logit

void HierLogitModel::validate() const {
  if (groups < 1) throw Error(ErrorKind::Validation, "hier-logit needs at least one group");
  if (!(mu_prior_var > 0)) throw Error(ErrorKind::Validation, "mu prior variance must be > 0");
  if (!(tau2_df > 0) || !(tau2_scale > 0)) {
    throw Error(ErrorKind::Validation, "tau2 prior df and scale must be > 0");
  }
}

double HierLogitModel::log_hyperprior(double mu, double tau2) const {
  return normal_logpdf(mu, mu_prior_mean, mu_prior_var) +
         scaled_inv_chi2_logpdf(tau2, tau2_df, tau2_scale);
}

ModelDefinition HierLogitModel::definition() const {
  validate();
  const HierLogitModel m = *this;
  const std::size_t N = groups;
  ModelDefinition def;
  def.name = "hier-logit";
  def.dim = N + 2;
  def.prior_proper = true;
  def.support.assign(N + 2, Interval{});
  def.support[N + 1] = Interval{0.0, std::numeric_limits<double>::infinity()};

  def.loglik_i = [](const ParameterVector& th, const ObservationSet& d, std::size_t i) {
    return binomial_logpmf_logit(d.y(i), d.trials(i), th[static_cast<Eigen::Index>(i)]);
  };
  def.loglik_grad = [N](const ParameterVector& th, const ObservationSet& d, std::size_t i) {
    Vector g = Vector::Zero(static_cast<Eigen::Index>(N + 2));
    const auto k = static_cast<Eigen::Index>(i);
    g[k] = d.y(i) - d.trials(i) * inv_logit(th[k]);
    return g;
  };
  def.loglik_hess = [N](const ParameterVector& th, const ObservationSet& d, std::size_t i) {
    Matrix h = Matrix::Zero(static_cast<Eigen::Index>(N + 2), static_cast<Eigen::Index>(N + 2));
    const auto k = static_cast<Eigen::Index>(i);
    const double xi = inv_logit(th[k]);
    h(k, k) = -d.trials(i) * xi * (1.0 - xi);
    return h;
  };

  def.logprior = [m, N](const ParameterVector& th) {
    const double mu = th[static_cast<Eigen::Index>(N)];
    const double v = th[static_cast<Eigen::Index>(N + 1)];
    double lp = m.log_hyperprior(mu, v);
    for (std::size_t i = 0; i < N; ++i) {
      lp += normal_logpdf(th[static_cast<Eigen::Index>(i)], mu, v);
    }
    return lp;
  };
  def.logprior_grad = [m, N](const ParameterVector& th) {
    const auto iN = static_cast<Eigen::Index>(N);
    const double mu = th[iN];
    const double v = th[iN + 1];
    Vector g(iN + 2);
    double sum_r = 0.0, sum_r2 = 0.0;
    for (Eigen::Index i = 0; i < iN; ++i) {
      const double r = th[i] - mu;
      g[i] = -r / v;
      sum_r += r;
      sum_r2 += r * r;
    }
    const double h = 0.5 * m.tau2_df;
    g[iN] = sum_r / v - (mu - m.mu_prior_mean) / m.mu_prior_var;
    g[iN + 1] = -0.5 * static_cast<double>(N) / v + sum_r2 / (2.0 * v * v) - (h + 1.0) / v +
                m.tau2_df * m.tau2_scale / (2.0 * v * v);
    return g;
  };
  def.logprior_hess = [m, N](const ParameterVector& th) {
    const auto iN = static_cast<Eigen::Index>(N);
    const double mu = th[iN];
    const double v = th[iN + 1];
    Matrix H = Matrix::Zero(iN + 2, iN + 2);
    double sum_r = 0.0, sum_r2 = 0.0;
    for (Eigen::Index i = 0; i < iN; ++i) {
      const double r = th[i] - mu;
      H(i, i) = -1.0 / v;
      H(i, iN) = H(iN, i) = 1.0 / v;
      H(i, iN + 1) = H(iN + 1, i) = r / (v * v);
      sum_r += r;
      sum_r2 += r * r;
    }
    const double h = 0.5 * m.tau2_df;
    H(iN, iN) = -static_cast<double>(N) / v - 1.0 / m.mu_prior_var;
    H(iN, iN + 1) = H(iN + 1, iN) = -sum_r / (v * v);
    H(iN + 1, iN + 1) = 0.5 * static_cast<double>(N) / (v * v) - sum_r2 / (v * v * v) +
                        (h + 1.0) / (v * v) - m.tau2_df * m.tau2_scale / (v * v * v);
    return H;
  };

  def.initial_point = [N](const ObservationSet& d) {
    const auto iN = static_cast<Eigen::Index>(N);
    ParameterVector th(iN + 2);
    for (Eigen::Index i = 0; i < iN; ++i) {
      const double y = d.y(static_cast<std::size_t>(i));
      const double n = d.trials(static_cast<std::size_t>(i));
      th[i] = std::log((y + 0.5) / (n - y + 0.5));
    }
    const double mean = th.head(iN).mean();
    const double var =
        iN > 1 ? (th.head(iN).array() - mean).square().sum() / static_cast<double>(iN - 1)
               : 1.0;
    th[iN] = mean;
    th[iN + 1] = std::max(var, 0.1);
    return th;
  };
  def.restart_points = [N, init = def.initial_point](const ObservationSet& d) {
    const auto iN = static_cast<Eigen::Index>(N);
    const ParameterVector base = init(d);
    std::vector<ParameterVector> out;
    // Strong shrinkage toward the mean, and a widened random-effect spread.
    ParameterVector shrunk = base;
    shrunk.head(iN) = (base.head(iN).array() + base[iN]) * 0.5;
    shrunk[iN + 1] = 0.5 * base[iN + 1];
    out.push_back(shrunk);
    ParameterVector wide = base;
    wide[iN + 1] = 4.0 * base[iN + 1];
    out.push_back(wide);
    return out;
  };
  def.check_data = [N](const ObservationSet& d) {
    if (!d.has_trials()) {
      throw Error(ErrorKind::Validation, "hier-logit data need trial sizes (n_trials)");
    }
    if (d.size() != N) {
      throw Error(ErrorKind::Validation, "hier-logit model has " + std::to_string(N) +
                                             " groups but data have " +
                                             std::to_string(d.size()) + " rows");
    }
  };
  return def;
}

ModelDefinition definition(const BuiltinModel& model) {
  return std::visit([](const auto& m) { return m.definition(); }, model);
}

}  // namespace paic
