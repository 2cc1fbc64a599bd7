#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <variant>

#include "paic/model.hpp"

namespace paic {

// y_i ~ N(mu, sigma_A2) with mu ~ N(mu0, tau02), or pi(mu) ∝ 1 when tau02 is
// empty (improper; logprior is the constant 0).
struct ConjugateNormalModel {
  double sigma_A2 = 1.0;
  double mu0 = 0.0;
  std::optional<double> tau02;

  bool flat() const { return !tau02.has_value(); }
  void validate() const;
  ModelDefinition definition() const;
};

struct ConjugatePosterior {
  double mean = 0.0;
  double variance = 0.0;
};

// Closed-form posterior N(mean, variance) of mu.
ConjugatePosterior conjugate_posterior(const ConjugateNormalModel& model,
                                       std::span<const double> y);
ConjugatePosterior conjugate_posterior(const ConjugateNormalModel& model,
                                       const ObservationSet& data);

// Binomial counts with logit random effects:
//   y_i ~ Bin(n_i, logit^-1(beta_i)),  beta_i ~ N(mu, tau2),
//   mu ~ N(mu_prior_mean, mu_prior_var),  tau2 ~ Scaled-Inv-chi2(df, scale).
// Parameter layout: (beta_1..beta_N, mu, tau2), so p = N + 2. The random-effect
// density of beta is part of log pi(theta).
struct HierLogitModel {
  std::size_t groups = 15;
  double mu_prior_mean = 0.0;
  double mu_prior_var = 1000.0 * 1000.0;
  double tau2_df = 0.1;
  double tau2_scale = 10.0;

  std::size_t dim() const { return groups + 2; }
  std::size_t mu_index() const { return groups; }
  std::size_t tau2_index() const { return groups + 1; }

  void validate() const;
  ModelDefinition definition() const;
  // Same model with the hyperprior terms only (no random-effect density).
  double log_hyperprior(double mu, double tau2) const;
};

using BuiltinModel = std::variant<ConjugateNormalModel, HierLogitModel>;

ModelDefinition definition(const BuiltinModel& model);

double log_binomial_coefficient(int n, int k);
// log(1 + exp(x)) without overflow.
double log1p_exp(double x);
double inv_logit(double x);
// Binomial log pmf with the normalizing constant.
double binomial_logpmf_logit(double y, int trials, double logit_p);
// Scaled-inverse-chi-squared log density in (df, scale) form.
double scaled_inv_chi2_logpdf(double x, double df, double scale);
double normal_logpdf(double x, double mean, double var);

}  // namespace paic
