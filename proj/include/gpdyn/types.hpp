#pragma once

#include <Eigen/Dense>

namespace gpdyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

}  // namespace gpdyn
