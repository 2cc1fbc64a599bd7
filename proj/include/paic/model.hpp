#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paic/types.hpp"

namespace paic {

// Open interval (lower, upper). Infinite ends are unbounded.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x > lower && x < upper; }
};

// Observed data y_1..y_n, optionally with binomial trial sizes n_i.
// Construction validates: every y finite; with trials, each y_i is an integer
// in [0, n_i] and every n_i is positive.
class ObservationSet {
 public:
  ObservationSet() = default;
  explicit ObservationSet(std::vector<double> y);
  ObservationSet(std::vector<double> y, std::vector<int> trials);

  std::size_t size() const { return y_.size(); }
  double y(std::size_t i) const { return y_[i]; }
  const std::vector<double>& values() const { return y_; }

  bool has_trials() const { return trials_.has_value(); }
  int trials(std::size_t i) const { return (*trials_)[i]; }
  const std::optional<std::vector<int>>& trial_sizes() const { return trials_; }

  // Observations at the given indices, in the given order.
  ObservationSet subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<double> y_;
  std::optional<std::vector<int>> trials_;
};

using LogLikFn =
    std::function<double(const ParameterVector&, const ObservationSet&, std::size_t)>;
using LogLikGradFn =
    std::function<Vector(const ParameterVector&, const ObservationSet&, std::size_t)>;
using LogLikHessFn =
    std::function<Matrix(const ParameterVector&, const ObservationSet&, std::size_t)>;
using LogPriorFn = std::function<double(const ParameterVector&)>;
using LogPriorGradFn = std::function<Vector(const ParameterVector&)>;
using LogPriorHessFn = std::function<Matrix(const ParameterVector&)>;

// A Bayesian model: per-observation log density log g(y_i | theta) and log
// prior log pi(theta). Derivative callbacks are optional; when both the
// likelihood and prior pieces are present they are combined into the
// per-observation term log g(y_i|theta) + (1/n) log pi(theta).
//
// When prior_proper is false, logprior is only defined up to a constant.
struct ModelDefinition {
  std::string name;
  std::size_t dim = 0;
  LogLikFn loglik_i;
  LogPriorFn logprior;
  bool prior_proper = true;

  LogLikGradFn loglik_grad;
  LogLikHessFn loglik_hess;
  LogPriorGradFn logprior_grad;
  LogPriorHessFn logprior_hess;

  std::vector<Interval> support;

  // Data-driven starting point for mode finding.
  std::function<ParameterVector(const ObservationSet&)> initial_point;
  // Extra restarts, derived deterministically from the initial point.
  std::function<std::vector<ParameterVector>(const ObservationSet&)> restart_points;
  // Throws Error(Validation) when data do not fit the model.
  std::function<void(const ObservationSet&)> check_data;

  bool has_analytic_grad() const { return loglik_grad && logprior_grad; }
  bool has_analytic_hess() const { return loglik_hess && logprior_hess; }
};

// Throws Validation if theta has the wrong length, a non-finite entry or
// leaves the support.
void check_parameter(const ModelDefinition& model, const ParameterVector& theta);
bool in_support(const ModelDefinition& model, const ParameterVector& theta);
void check_data(const ModelDefinition& model, const ObservationSet& data);

// Sum_i log g(y_i | theta). A non-finite term throws NonFinite naming i.
double loglik_total(const ModelDefinition& model, const ObservationSet& data,
                    const ParameterVector& theta);

// log L(theta|y) + log pi(theta).
double logpost_unnorm(const ModelDefinition& model, const ObservationSet& data,
                      const ParameterVector& theta);

// log g(y_i|theta) + (1/n) log pi(theta), n = data.size().
double observation_term(const ModelDefinition& model, const ObservationSet& data,
                        const ParameterVector& theta, std::size_t i);

}  // namespace paic
