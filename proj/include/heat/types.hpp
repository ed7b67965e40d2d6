#pragma once
#include <Eigen/Core>
#include <cstdint>

namespace heat {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Predictor availability, p* rows by J populations. true means the predictor
// was measured in that population.
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

} // namespace heat
