#include "ddsbl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ddsbl/errors.hpp"

namespace ddsbl {

double nmse_db(const Eigen::VectorXcd& truth, const Eigen::VectorXcd& estimate) {
  if (truth.size() != estimate.size()) throw DimensionError("nmse: length mismatch");
  const double denom = truth.squaredNorm();
  if (!(denom > 0.0)) throw std::domain_error("nmse: truth vector is zero");
  const double num = (truth - estimate).squaredNorm();
  if (num == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(num / denom));
}

}  // namespace ddsbl
