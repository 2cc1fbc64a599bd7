#include "paic/criteria.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "paic/error.hpp"
#include "paic/parallel.hpp"
#include "paic/rng.hpp"

namespace paic {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void add_draw_warning(CriterionReport& r) {
  if (r.S < kMinCriterionDraws) {
    r.warnings.push_back("only " + std::to_string(r.S) + " posterior draws (floor is " +
                         std::to_string(kMinCriterionDraws) + ")");
  }
}

double fold_variance(const ConjugateNormalModel& m, double n_fold) {
  const double prec = (m.flat() ? 0.0 : 1.0 / *m.tau02) + n_fold / m.sigma_A2;
  return 1.0 / prec;
}

// Posterior of mu given all observations except i.
ConjugatePosterior conjugate_fold(const ConjugateNormalModel& m, const ObservationSet& data,
                                  double total, std::size_t i) {
  const double n_fold = static_cast<double>(data.size()) - 1.0;
  if (m.flat() && n_fold < 1.0) {
    throw Error(ErrorKind::Validation, "flat-prior fold posterior needs two observations");
  }
  const double var = fold_variance(m, n_fold);
  const double prior_term = m.flat() ? 0.0 : m.mu0 / *m.tau02;
  return {(prior_term + (total - data.y(i)) / m.sigma_A2) * var, var};
}

double expected_normal_loglik(double y, double sigma_A2, const ConjugatePosterior& post) {
  const double d = y - post.mean;
  return -0.5 * (kLog2Pi + std::log(sigma_A2)) - (d * d + post.variance) / (2.0 * sigma_A2);
}

}  // namespace

CriterionReport failed_report(const std::string& name, const std::string& message,
                              std::size_t n, std::size_t S, std::uint64_t seed) {
  CriterionReport r;
  r.name = name;
  r.value = r.fit = r.penalty = std::numeric_limits<double>::quiet_NaN();
  r.n = n;
  r.S = S;
  r.seed = seed;
  r.error = message;
  return r;
}

PointwiseLogLik pointwise_loglik(const ModelDefinition& model, const ObservationSet& data,
                                 const PosteriorDraws& draws) {
  if (draws.dim() != model.dim) {
    throw Error(ErrorKind::Validation, "draws have " + std::to_string(draws.dim()) +
                                           " columns, model " + model.name + " has " +
                                           std::to_string(model.dim));
  }
  if (draws.size() == 0) throw Error(ErrorKind::Validation, "no posterior draws");
  check_data(model, data);
  PointwiseLogLik out;
  out.seed = draws.seed;
  out.values.resize(draws.draws.rows(), static_cast<Eigen::Index>(data.size()));
  ParameterVector theta(static_cast<Eigen::Index>(model.dim));
  for (Eigen::Index s = 0; s < draws.draws.rows(); ++s) {
    theta = draws.draws.row(s).transpose();
    if (!in_support(model, theta)) {
      throw Error(ErrorKind::Validation, "draw " + std::to_string(s) + " is outside the support");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double v = model.loglik_i(theta, data, i);
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::NonFinite, "log g(y_" + std::to_string(i) + " | draw " +
                                              std::to_string(s) + ") is not finite");
      }
      out.values(s, static_cast<Eigen::Index>(i)) = v;
    }
  }
  return out;
}

CriterionReport paic(const PointwiseLogLik& pointwise, const InfoMatrixPair& pair) {
  const TraceCorrection tc = trace_correction(pair);
  CriterionReport r;
  r.name = "paic";
  r.n = pointwise.observations();
  r.S = pointwise.draws();
  r.seed = pointwise.seed;
  r.fit = pointwise.fit();
  r.penalty = tc.value;
  r.value = -2.0 * r.fit + 2.0 * r.penalty;
  r.extras["cond_J"] = pair.cond_J;
  if (pair.scaling != FisherScaling::NMinusOne) {
    r.warnings.push_back("I_n was scaled by 1/n; PAIC uses 1/(n-1)");
  }
  add_draw_warning(r);
  return r;
}

CriterionReport bpic(const ModelDefinition& model, const ObservationSet& data,
                     const PosteriorDraws& draws, const ModeResult& mode,
                     const InfoMatrixPair& pair_bpic) {
  if (!model.prior_proper) {
    throw Error(ErrorKind::ImproperPrior,
                "BPIC undefined under degenerate prior: log pi(theta) has no fixed value");
  }
  if (pair_bpic.scaling != FisherScaling::N) {
    throw Error(ErrorKind::Validation, "BPIC needs I_n on the 1/n scale");
  }
  if (draws.dim() != model.dim) {
    throw Error(ErrorKind::Validation, "draws do not match the model dimension");
  }
  const TraceCorrection tc = trace_correction(pair_bpic);
  double sum_loglik = 0.0, sum_logprior = 0.0;
  ParameterVector theta(static_cast<Eigen::Index>(model.dim));
  for (Eigen::Index s = 0; s < draws.draws.rows(); ++s) {
    theta = draws.draws.row(s).transpose();
    sum_loglik += loglik_total(model, data, theta);
    sum_logprior += model.logprior(theta);
  }
  const double S = static_cast<double>(draws.size());
  const double plugin = logpost_unnorm(model, data, mode.theta_hat);
  const double mean_logprior = sum_logprior / S;
  const double n_eta = plugin - mean_logprior - tc.value - 0.5 * static_cast<double>(model.dim);

  CriterionReport r;
  r.name = "bpic";
  r.n = data.size();
  r.S = draws.size();
  r.seed = draws.seed;
  r.fit = sum_loglik / S;
  r.penalty = r.fit - n_eta;
  r.value = -2.0 * r.fit + 2.0 * r.penalty;
  r.extras["trace"] = tc.value;
  r.extras["plugin_logpost"] = plugin;
  r.extras["mean_logprior"] = mean_logprior;
  r.extras["half_dim"] = 0.5 * static_cast<double>(model.dim);
  if (!mode.converged) r.warnings.push_back("posterior mode did not converge");
  add_draw_warning(r);
  return r;
}

CriterionReport waic2(const PointwiseLogLik& pointwise) {
  if (pointwise.draws() < 2) throw Error(ErrorKind::Validation, "WAIC2 needs at least 2 draws");
  const Matrix& v = pointwise.values;
  const Eigen::RowVectorXd means = v.colwise().mean();
  const double denom = static_cast<double>(v.rows()) - 1.0;
  double p_waic = 0.0;
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    p_waic += (v.col(i).array() - means[i]).square().sum() / denom;
  }
  CriterionReport r;
  r.name = "waic2";
  r.n = pointwise.observations();
  r.S = pointwise.draws();
  r.seed = pointwise.seed;
  r.fit = means.sum();
  r.penalty = p_waic;
  r.value = -2.0 * r.fit + 2.0 * r.penalty;
  add_draw_warning(r);
  return r;
}

CriterionReport loo_exact(std::size_t n, const FoldPredictor& predictor,
                          const PointwiseLogLik* in_sample, unsigned threads) {
  if (n > kMaxLooObservations) {
    throw Error(ErrorKind::Validation, "exact LOO refits are limited to " +
                                           std::to_string(kMaxLooObservations) +
                                           " observations, got " + std::to_string(n));
  }
  if (in_sample && in_sample->observations() != n) {
    throw Error(ErrorKind::Validation, "in-sample pointwise matrix does not match n");
  }
  std::vector<FoldPrediction> folds(n);
  parallel_for(n, threads, [&](std::size_t i) { folds[i] = predictor(i); });

  double elpd = 0.0;
  int flagged = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(folds[i].expected_loglik)) {
      throw Error(ErrorKind::NonFinite, "LOO fold " + std::to_string(i) + " is not finite");
    }
    elpd += folds[i].expected_loglik;
    if (!folds[i].converged) ++flagged;
  }
  CriterionReport r;
  r.name = "loo";
  r.n = n;
  r.S = in_sample ? in_sample->draws() : 0;
  r.seed = in_sample ? in_sample->seed : 0;
  if (in_sample) {
    r.fit = in_sample->fit();
    r.penalty = r.fit - elpd;
  } else {
    r.fit = elpd;
    r.penalty = 0.0;
  }
  r.value = -2.0 * elpd;
  r.extras["elpd_loo"] = elpd;
  r.extras["flagged_folds"] = flagged;
  if (flagged > 0) {
    r.warnings.push_back(std::to_string(flagged) + " LOO fold(s) failed the convergence gate");
  }
  return r;
}

FoldPredictor sampled_fold_predictor(const ModelDefinition& model, const ObservationSet& data,
                                     std::function<FoldDraws(std::size_t)> sample) {
  return [&model, &data, sample = std::move(sample)](std::size_t i) {
    const FoldDraws fd = sample(i);
    ParameterVector theta(static_cast<Eigen::Index>(model.dim));
    double sum = 0.0;
    for (Eigen::Index s = 0; s < fd.draws.draws.rows(); ++s) {
      theta = fd.draws.draws.row(s).transpose();
      sum += model.loglik_i(theta, data, i);
    }
    return FoldPrediction{sum / static_cast<double>(fd.draws.size()), fd.converged};
  };
}

FoldPredictor conjugate_normal_fold_predictor(const ConjugateNormalModel& model,
                                              const ObservationSet& data) {
  model.validate();
  const double total = std::accumulate(data.values().begin(), data.values().end(), 0.0);
  return [model, &data, total](std::size_t i) {
    const auto post = conjugate_fold(model, data, total, i);
    return FoldPrediction{expected_normal_loglik(data.y(i), model.sigma_A2, post), true};
  };
}

FoldPredictor conjugate_normal_sampled_folds(const ConjugateNormalModel& model,
                                             const ObservationSet& data, std::size_t draws,
                                             std::uint64_t seed) {
  model.validate();
  const double total = std::accumulate(data.values().begin(), data.values().end(), 0.0);
  return [model, &data, total, draws, seed](std::size_t i) {
    const auto post = conjugate_fold(model, data, total, i);
    Rng rng = make_rng(seed, {0x4C4F4FULL, i});
    std::normal_distribution<double> z(0.0, 1.0);
    const double sd = std::sqrt(post.variance);
    double sum = 0.0;
    for (std::size_t s = 0; s < draws; ++s) {
      sum += normal_logpdf(data.y(i), post.mean + sd * z(rng), model.sigma_A2);
    }
    return FoldPrediction{sum / static_cast<double>(draws), true};
  };
}

FoldPredictor hier_logit_sampled_folds(const HierLogitModel& model, const ObservationSet& data,
                                       const HierLogitSamplerOptions& opts, std::uint64_t seed) {
  return [model, &data, opts, seed](std::size_t i) {
    HierLogitSamplerOptions fold = opts;
    fold.active.assign(model.groups, true);
    fold.active[i] = false;
    fold.stream = opts.stream + 1000 + i;
    const HierLogitRun run = sample_hier_logit(model, data, fold, seed);
    const auto k = static_cast<Eigen::Index>(i);
    double sum = 0.0;
    for (Eigen::Index s = 0; s < run.draws.draws.rows(); ++s) {
      sum += binomial_logpmf_logit(data.y(i), data.trials(i), run.draws.draws(s, k));
    }
    return FoldPrediction{sum / static_cast<double>(run.draws.size()),
                          run.diagnostics.converged};
  };
}

CriterionReport popt_closed_form(const BuiltinModel& model, const ObservationSet& data) {
  const auto* normal = std::get_if<ConjugateNormalModel>(&model);
  if (!normal) {
    throw Error(ErrorKind::UnsupportedModel,
                "closed-form p_opt is only available for the conjugate normal model");
  }
  const ClosedFormBias b = closed_form_bias_estimators(*normal, data);
  CriterionReport r;
  r.name = "popt";
  r.n = data.size();
  r.fit = static_cast<double>(data.size()) * eta_hat_conjugate_normal(*normal, data);
  r.penalty = static_cast<double>(data.size()) * b.popt;
  r.value = -2.0 * r.fit + 2.0 * r.penalty;
  r.extras["p_opt"] = 2.0 * r.penalty;
  return r;
}

CriterionReport dic(const ModelDefinition& model, const ObservationSet& data,
                    const PosteriorDraws& draws) {
  if (draws.dim() != model.dim || draws.size() == 0) {
    throw Error(ErrorKind::Validation, "draws do not match the model dimension");
  }
  const ParameterVector mean = draws.draws.colwise().mean().transpose();
  if (!in_support(model, mean)) {
    throw Error(ErrorKind::Validation,
                "posterior mean lies outside the support; reparameterize before using DIC");
  }
  double sum = 0.0;
  ParameterVector theta(static_cast<Eigen::Index>(model.dim));
  for (Eigen::Index s = 0; s < draws.draws.rows(); ++s) {
    theta = draws.draws.row(s).transpose();
    sum += loglik_total(model, data, theta);
  }
  const double at_mean = loglik_total(model, data, mean);
  CriterionReport r;
  r.name = "dic";
  r.n = data.size();
  r.S = draws.size();
  r.seed = draws.seed;
  r.fit = at_mean;
  r.penalty = 2.0 * (at_mean - sum / static_cast<double>(draws.size()));
  r.value = -2.0 * r.fit + 2.0 * r.penalty;
  add_draw_warning(r);
  return r;
}

double eta_hat_conjugate_normal(const ConjugateNormalModel& model, const ObservationSet& data) {
  const auto post = conjugate_posterior(model, data);
  double sum = 0.0;
  for (double y : data.values()) sum += expected_normal_loglik(y, model.sigma_A2, post);
  return sum / static_cast<double>(data.size());
}

ClosedFormBias closed_form_bias_estimators(const ConjugateNormalModel& model,
                                           const ObservationSet& data) {
  const auto post = conjugate_posterior(model, data);
  const double n = static_cast<double>(data.size());
  if (n < 2) throw Error(ErrorKind::Validation, "closed-form estimators need n >= 2");
  const double s2a = model.sigma_A2;
  const double prior_shift = model.flat() ? 0.0 : (model.mu0 - post.mean) / (n * *model.tau02);
  double sum_q2 = 0.0, sum_d2 = 0.0;
  for (double y : data.values()) {
    const double d = y - post.mean;
    const double q = prior_shift + d / s2a;
    sum_q2 += q * q;
    sum_d2 += d * d;
  }
  ClosedFormBias b;
  b.paic = post.variance * sum_q2 / (n - 1.0);
  b.bpic = post.variance * sum_q2 / n;
  b.waic2 = post.variance / (s2a * s2a) * (n * post.variance / 2.0 + sum_d2) / n;
  b.popt = fold_variance(model, n - 1.0) / s2a;

  const double total = std::accumulate(data.values().begin(), data.values().end(), 0.0);
  double loo = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    loo += expected_normal_loglik(data.y(i), s2a, conjugate_fold(model, data, total, i));
  }
  b.cv = eta_hat_conjugate_normal(model, data) - loo / n;
  return b;
}

}  // namespace paic
