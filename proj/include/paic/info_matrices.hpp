#pragma once

#include <filesystem>

#include "paic/calculus.hpp"
#include "paic/model.hpp"

namespace paic {

// Normalization of the outer-product matrix I_n. The PAIC form divides by
// n - 1; the BPIC form divides by n.
enum class FisherScaling { NMinusOne, N };

struct InfoMatrixPair {
  Matrix J;
  Matrix I;
  ParameterVector theta_hat;
  FisherScaling scaling = FisherScaling::NMinusOne;
  // lambda_max / lambda_min of J; +inf when J is not positive definite.
  double cond_J = 0.0;
};

inline constexpr double kMaxConditionNumber = 1e12;

// J_n = -(1/n) sum_i d^2/dtheta dtheta' [log g(y_i|theta) + (1/n) log pi(theta)].
Matrix compute_Jn(const ModelDefinition& model, const ObservationSet& data,
                  const ParameterVector& theta_hat, const DiffConfig& cfg = {});

// I_n = c * sum_i s_i s_i', s_i the gradient of the same per-observation term,
// c = 1/(n-1) or 1/n. Scores are not centered.
Matrix compute_In(const ModelDefinition& model, const ObservationSet& data,
                  const ParameterVector& theta_hat,
                  FisherScaling scaling = FisherScaling::NMinusOne, const DiffConfig& cfg = {});

InfoMatrixPair make_info_pair(const ModelDefinition& model, const ObservationSet& data,
                              const ParameterVector& theta_hat,
                              FisherScaling scaling = FisherScaling::NMinusOne,
                              const DiffConfig& cfg = {});

// Builds a pair from given matrices (for audits and tests); computes cond_J.
InfoMatrixPair make_info_pair(Matrix J, Matrix I, ParameterVector theta_hat,
                              FisherScaling scaling = FisherScaling::NMinusOne);

double condition_number(const Matrix& symmetric);

struct TraceCorrection {
  double value = 0.0;
  // Eigenvalues of J^-1 I (generalized problem I v = lambda J v); they sum to value.
  Vector eigenvalues;
};

// tr{J^-1 I} via a Cholesky solve of J X = I. Throws IllConditioned when
// cond_J exceeds kMaxConditionNumber.
TraceCorrection trace_correction(const InfoMatrixPair& pair);

// Writes J and I as two CSV files <stem>_J.csv and <stem>_I.csv.
void export_info_pair_csv(const InfoMatrixPair& pair, const std::filesystem::path& stem);

}  // namespace paic
