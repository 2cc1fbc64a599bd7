#include "paic/model.hpp"

#include <cmath>
#include <sstream>

#include "paic/error.hpp"

namespace paic {

ObservationSet::ObservationSet(std::vector<double> y) : y_(std::move(y)) {
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (!std::isfinite(y_[i])) {
      throw Error(ErrorKind::Validation,
                  "observation " + std::to_string(i) + " is not finite");
    }
  }
}

ObservationSet::ObservationSet(std::vector<double> y, std::vector<int> trials)
    : ObservationSet(std::move(y)) {
  if (trials.size() != y_.size()) {
    throw Error(ErrorKind::Validation, "trial sizes length " +
                                           std::to_string(trials.size()) +
                                           " does not match " +
                                           std::to_string(y_.size()) + " observations");
  }
  for (std::size_t i = 0; i < y_.size(); ++i) {
    if (trials[i] <= 0) {
      throw Error(ErrorKind::Validation,
                  "trial size at " + std::to_string(i) + " must be positive");
    }
    if (y_[i] < 0 || y_[i] > trials[i] || std::floor(y_[i]) != y_[i]) {
      std::ostringstream os;
      os << "observation " << i << " = " << y_[i]
         << " is not an integer count in [0, " << trials[i] << "]";
      throw Error(ErrorKind::Validation, os.str());
    }
  }
  trials_ = std::move(trials);
}

ObservationSet ObservationSet::subset(std::span<const std::size_t> indices) const {
  std::vector<double> y;
  y.reserve(indices.size());
  for (auto i : indices) y.push_back(y_.at(i));
  if (!trials_) return ObservationSet(std::move(y));
  std::vector<int> t;
  t.reserve(indices.size());
  for (auto i : indices) t.push_back(trials_->at(i));
  return ObservationSet(std::move(y), std::move(t));
}

bool in_support(const ModelDefinition& model, const ParameterVector& theta) {
  if (static_cast<std::size_t>(theta.size()) != model.dim) return false;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (!std::isfinite(theta[j])) return false;
    if (!model.support.empty() && !model.support[j].contains(theta[j])) return false;
  }
  return true;
}

void check_parameter(const ModelDefinition& model, const ParameterVector& theta) {
  if (static_cast<std::size_t>(theta.size()) != model.dim) {
    throw Error(ErrorKind::Validation,
                "parameter has length " + std::to_string(theta.size()) + ", model " +
                    model.name + " expects " + std::to_string(model.dim));
  }
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (!std::isfinite(theta[j])) {
      throw Error(ErrorKind::Validation,
                  "parameter coordinate " + std::to_string(j) + " is not finite");
    }
    if (!model.support.empty() && !model.support[j].contains(theta[j])) {
      std::ostringstream os;
      os << "parameter coordinate " << j << " = " << theta[j] << " is outside ("
         << model.support[j].lower << ", " << model.support[j].upper << ")";
      throw Error(ErrorKind::Validation, os.str());
    }
  }
}

void check_data(const ModelDefinition& model, const ObservationSet& data) {
  if (model.check_data) model.check_data(data);
}

double loglik_total(const ModelDefinition& model, const ObservationSet& data,
                    const ParameterVector& theta) {
  check_parameter(model, theta);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double term = model.loglik_i(theta, data, i);
    if (!std::isfinite(term)) {
      throw Error(ErrorKind::NonFinite,
                  "log-likelihood term for observation " + std::to_string(i) +
                      " is not finite");
    }
    total += term;
  }
  return total;
}

double logpost_unnorm(const ModelDefinition& model, const ObservationSet& data,
                      const ParameterVector& theta) {
  const double ll = loglik_total(model, data, theta);
  const double lp = model.logprior(theta);
  if (!std::isfinite(lp)) {
    throw Error(ErrorKind::NonFinite, "log prior is not finite");
  }
  return ll + lp;
}

double observation_term(const ModelDefinition& model, const ObservationSet& data,
                        const ParameterVector& theta, std::size_t i) {
  const double n = static_cast<double>(data.size());
  return model.loglik_i(theta, data, i) + model.logprior(theta) / n;
}

}  // namespace paic
