#pragma once

#include <Eigen/Dense>

namespace paic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Model parameter theta. Length is the owning model's dimension p.
using ParameterVector = Eigen::VectorXd;

}  // namespace paic
