#pragma once

#include <Eigen/Dense>

namespace ddsbl {

inline constexpr double kNmseFloorDb = -300.0;

/// 10 log10(||h - h_hat||^2 / ||h||^2), floored at -300 dB. Throws
/// std::domain_error for an all-zero truth.
double nmse_db(const Eigen::VectorXcd& truth, const Eigen::VectorXcd& estimate);

}  // namespace ddsbl
