#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "paic/builtin_models.hpp"
#include "paic/info_matrices.hpp"
#include "paic/mcmc.hpp"
#include "paic/optimize.hpp"

namespace paic {

// Entry (s, i) = log g(y_i | theta^(s)).
struct PointwiseLogLik {
  Matrix values;  // S x n
  std::uint64_t seed = 0;

  std::size_t draws() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t observations() const { return static_cast<std::size_t>(values.cols()); }
  // Posterior mean of log g(y_i|theta) for each i.
  Vector column_means() const { return values.colwise().mean().transpose(); }
  // sum_i E_{theta|y} log g(y_i|theta) = n * eta_hat.
  double fit() const { return column_means().sum(); }
};

// All criteria are on the deviance scale: value = -2 * fit + 2 * penalty, with
// fit in log-likelihood units (summed over observations). penalty / n is the
// per-observation bias estimate.
struct CriterionReport {
  std::string name;
  double value = 0.0;
  double fit = 0.0;
  double penalty = 0.0;
  std::size_t n = 0;
  std::size_t S = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
  // Set when the criterion could not be computed; numbers are then NaN.
  std::optional<std::string> error;
  std::map<std::string, double> extras;

  double bias_per_observation() const { return penalty / static_cast<double>(n); }
};

inline constexpr std::size_t kMinCriterionDraws = 1000;

CriterionReport failed_report(const std::string& name, const std::string& message,
                              std::size_t n = 0, std::size_t S = 0, std::uint64_t seed = 0);

PointwiseLogLik pointwise_loglik(const ModelDefinition& model, const ObservationSet& data,
                                 const PosteriorDraws& draws);

// PAIC = -2 sum_i E log g(y_i|theta) + 2 tr{J_n^-1 I_n}.
CriterionReport paic(const PointwiseLogLik& pointwise, const InfoMatrixPair& pair);

// -2 n eta_hat_BPIC with
//   n eta_hat_BPIC = log{pi(mode) L(mode|y)} - E log pi(theta) - tr{J_n^-1 I_n} - p/2,
// E over the draws and I_n on the 1/n scale. fit is the posterior mean
// log-likelihood, so penalty = fit - n eta_hat_BPIC. The trace part alone is
// in extras["trace"]. Refuses improper priors (ImproperPrior).
CriterionReport bpic(const ModelDefinition& model, const ObservationSet& data,
                     const PosteriorDraws& draws, const ModeResult& mode,
                     const InfoMatrixPair& pair_bpic);

// penalty = sum_i var_s log g(y_i|theta^(s)) with the S-1 denominator.
CriterionReport waic2(const PointwiseLogLik& pointwise);

// Predictive log density of held-out observation i under the posterior
// given the remaining data.
struct FoldPrediction {
  double expected_loglik = 0.0;
  bool converged = true;
};
using FoldPredictor = std::function<FoldPrediction(std::size_t held_out)>;

inline constexpr std::size_t kMaxLooObservations = 1000;

// Exact-refit leave-one-out. value = -2 sum_i E_{theta|y_-i} log g(y_i|theta).
// With an in-sample pointwise matrix, fit is the in-sample posterior mean
// log-likelihood and penalty = fit - elpd_loo; otherwise fit = elpd_loo and
// penalty = 0. Non-converged folds are counted in extras["flagged_folds"].
CriterionReport loo_exact(std::size_t n, const FoldPredictor& predictor,
                          const PointwiseLogLik* in_sample = nullptr, unsigned threads = 1);

// Fold predictor that refits by sampling: runs `sample(i)` and averages
// log g(y_i|theta) over the returned draws.
struct FoldDraws {
  PosteriorDraws draws;
  bool converged = true;
};
FoldPredictor sampled_fold_predictor(const ModelDefinition& model, const ObservationSet& data,
                                     std::function<FoldDraws(std::size_t)> sample);

// Closed-form fold predictive for the conjugate normal model.
FoldPredictor conjugate_normal_fold_predictor(const ConjugateNormalModel& model,
                                              const ObservationSet& data);
// Fold sampler for the conjugate normal model (exact iid draws per fold).
FoldPredictor conjugate_normal_sampled_folds(const ConjugateNormalModel& model,
                                             const ObservationSet& data, std::size_t draws,
                                             std::uint64_t seed);
// Fold sampler for the hierarchical logit: the held-out group's likelihood is
// dropped, its beta stays in the model.
FoldPredictor hier_logit_sampled_folds(const HierLogitModel& model, const ObservationSet& data,
                                       const HierLogitSamplerOptions& opts, std::uint64_t seed);

// Expected deviance penalized loss, conjugate normal only:
// penalty = n / (1/tau02 + (n-1)/sigma_A2) / sigma_A2. UnsupportedModel otherwise.
CriterionReport popt_closed_form(const BuiltinModel& model, const ObservationSet& data);

// DIC with p_D = 2(log L(theta_bar|y) - mean_s log L(theta^(s)|y)).
CriterionReport dic(const ModelDefinition& model, const ObservationSet& data,
                    const PosteriorDraws& draws);

// Per-observation bias estimates for the conjugate normal model.
struct ClosedFormBias {
  double paic = 0.0;
  double bpic = 0.0;
  double waic2 = 0.0;  // sum of posterior variances divided by n
  double popt = 0.0;
  double cv = 0.0;
};

ClosedFormBias closed_form_bias_estimators(const ConjugateNormalModel& model,
                                           const ObservationSet& data);

// (1/n) sum_i E_{mu|y} log g(y_i|mu), closed form.
double eta_hat_conjugate_normal(const ConjugateNormalModel& model, const ObservationSet& data);

}  // namespace paic
