#pragma once

#include <vector>

#include "kunet/matrix.hpp"

namespace kunet {

/// Mean squared error over all entries. Lengths must match and be nonzero.
double mse(const std::vector<double>& pred, const std::vector<double>& target);
double mse(const Matrix& pred, const Matrix& target);

/// d mse / d pred, entry i: 2 * (pred_i - target_i) / n.
std::vector<double> mse_grad(const std::vector<double>& pred,
                             const std::vector<double>& target);
Matrix mse_grad(const Matrix& pred, const Matrix& target);

}  // namespace kunet
