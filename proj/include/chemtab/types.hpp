#pragma once

#include <Eigen/Dense>

namespace chemtab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

} // namespace chemtab
