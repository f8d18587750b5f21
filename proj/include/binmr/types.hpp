#ifndef BINMR_TYPES_HPP
#define BINMR_TYPES_HPP

#include <Eigen/Dense>

namespace binmr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace binmr

#endif  // BINMR_TYPES_HPP
