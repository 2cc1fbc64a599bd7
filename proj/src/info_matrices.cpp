#include "paic/info_matrices.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "paic/error.hpp"
#include "paic/report.hpp"

namespace paic {

namespace {

void require_dims(const ModelDefinition& model, const ObservationSet& data,
                  const ParameterVector& theta) {
  check_parameter(model, theta);
  check_data(model, data);
  if (data.size() < 2) {
    throw Error(ErrorKind::Validation, "information matrices need at least two observations");
  }
}

}  // namespace

Matrix compute_Jn(const ModelDefinition& model, const ObservationSet& data,
                  const ParameterVector& theta_hat, const DiffConfig& cfg) {
  require_dims(model, data, theta_hat);
  const auto p = static_cast<Eigen::Index>(model.dim);
  Matrix J = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Matrix h = observation_term_hess(model, data, theta_hat, i, cfg);
    if (!h.allFinite()) {
      throw Error(ErrorKind::NonFinite,
                  "non-finite Hessian for observation " + std::to_string(i));
    }
    J -= h;
  }
  J /= static_cast<double>(data.size());
  return 0.5 * (J + J.transpose());
}

Matrix compute_In(const ModelDefinition& model, const ObservationSet& data,
                  const ParameterVector& theta_hat, FisherScaling scaling,
                  const DiffConfig& cfg) {
  require_dims(model, data, theta_hat);
  const auto p = static_cast<Eigen::Index>(model.dim);
  Matrix I = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector s = observation_term_grad(model, data, theta_hat, i, cfg);
    if (!s.allFinite()) {
      throw Error(ErrorKind::NonFinite, "non-finite score for observation " + std::to_string(i));
    }
    I.selfadjointView<Eigen::Lower>().rankUpdate(s);
  }
  I = I.selfadjointView<Eigen::Lower>();
  const double n = static_cast<double>(data.size());
  return I / (scaling == FisherScaling::NMinusOne ? n - 1.0 : n);
}

double condition_number(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

InfoMatrixPair make_info_pair(Matrix J, Matrix I, ParameterVector theta_hat,
                              FisherScaling scaling) {
  InfoMatrixPair pair;
  pair.cond_J = condition_number(J);
  pair.J = std::move(J);
  pair.I = std::move(I);
  pair.theta_hat = std::move(theta_hat);
  pair.scaling = scaling;
  return pair;
}

InfoMatrixPair make_info_pair(const ModelDefinition& model, const ObservationSet& data,
                              const ParameterVector& theta_hat, FisherScaling scaling,
                              const DiffConfig& cfg) {
  return make_info_pair(compute_Jn(model, data, theta_hat, cfg),
                        compute_In(model, data, theta_hat, scaling, cfg), theta_hat, scaling);
}

TraceCorrection trace_correction(const InfoMatrixPair& pair) {
  if (!(pair.cond_J <= kMaxConditionNumber)) {
    std::ostringstream os;
    os << "J_n is ill-conditioned (cond = " << pair.cond_J << ")";
    throw Error(ErrorKind::IllConditioned, os.str());
  }
  Eigen::LLT<Matrix> llt(pair.J);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::IllConditioned, "J_n is not positive definite");
  }
  const Matrix X = llt.solve(pair.I);
  TraceCorrection out;
  out.value = X.trace();
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(pair.I, pair.J,
                                                       Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  out.eigenvalues = ges.eigenvalues();
  return out;
}

void export_info_pair_csv(const InfoMatrixPair& pair, const std::filesystem::path& stem) {
  auto write = [](const Matrix& M, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
      for (Eigen::Index c = 0; c < M.cols(); ++c) {
        if (c) out << ',';
        out << format_double(M(r, c));
      }
      out << '\n';
    }
  };
  write(pair.J, stem.string() + "_J.csv");
  write(pair.I, stem.string() + "_I.csv");
}

}  // namespace paic
