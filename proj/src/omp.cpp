#include "ddsbl/omp.hpp"

#include <Eigen/QR>
#include <limits>
#include <stdexcept>

#include "ddsbl/errors.hpp"
#include "ddsbl/metrics.hpp"

namespace ddsbl {

RecoveryResult omp_estimate(const Measurement& m, const OmpStop& stop, const SolveOptions& opts) {
  if (!stop.sparsity && !stop.residual_tol) throw std::invalid_argument("omp: no stopping rule");
  if (m.y.size() != m.phi.rows() || m.phi.cols() == 0) throw DimensionError("omp: bad dimensions");
  const Eigen::Index Q = m.Q();
  const Eigen::Index R = m.R();
  if (stop.sparsity && (*stop.sparsity < 1 || *stop.sparsity > Q)) {
    throw InfeasibleError("omp: sparsity must lie in [1, Q]");
  }
  const int budget = static_cast<int>(std::min<Eigen::Index>(stop.sparsity.value_or(Q), std::min(Q, R)));
  const double tol = stop.residual_tol.value_or(-1.0);

  RecoveryResult out;
  out.h_hat = Eigen::VectorXcd::Zero(R);
  Eigen::VectorXcd residual = m.y;
  Eigen::VectorXcd coef;
  std::vector<bool> chosen(R, false);
  Eigen::MatrixXcd basis(Q, 0);

  while (static_cast<int>(out.support.size()) < budget && residual.norm() > tol) {
    const Eigen::VectorXd corr = (m.phi.adjoint() * residual).cwiseAbs();
    Eigen::Index best = -1;
    double best_val = 0.0;
    for (Eigen::Index c = 0; c < R; ++c) {
      if (!chosen[c] && corr(c) > best_val) {
        best_val = corr(c);
        best = c;
      }
    }
    if (best < 0) break;  // residual orthogonal to every remaining atom
    chosen[best] = true;
    out.support.push_back(static_cast<int>(best));
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    basis.col(basis.cols() - 1) = m.phi.col(best);

    coef = basis.colPivHouseholderQr().solve(m.y);
    residual = m.y - basis * coef;
    out.h_hat.setZero();
    for (std::size_t i = 0; i < out.support.size(); ++i) out.h_hat(out.support[i]) = coef(i);

    ++out.iterations;
    TraceEntry e;
    e.iter = out.iterations;
    e.rel_change = std::numeric_limits<double>::quiet_NaN();
    e.nmse_db = opts.truth ? nmse_db(*opts.truth, out.h_hat) : std::numeric_limits<double>::quiet_NaN();
    e.residual_norm = residual.norm();
    out.trace.push_back(e);
  }
  out.converged = true;
  return out;
}

}  // namespace ddsbl
