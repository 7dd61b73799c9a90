#pragma once

#include <optional>

#include "ddsbl/measurement.hpp"
#include "ddsbl/sbl.hpp"

namespace ddsbl {

/// Stop after `sparsity` atoms, or once ||r|| <= residual_tol, whichever
/// comes first. At least one of the two must be set.
struct OmpStop {
  std::optional<int> sparsity;
  std::optional<double> residual_tol;

  static OmpStop atoms(int k) { return {k, std::nullopt}; }
  static OmpStop residual(double tol) { return {std::nullopt, tol}; }
};

/// Orthogonal matching pursuit: greedy max |Phi^H r| selection with a
/// least-squares refit on the whole support after each pick. The trace
/// records the residual norm per step; `support` lists the picked columns in
/// selection order.
RecoveryResult omp_estimate(const Measurement& m, const OmpStop& stop,
                            const SolveOptions& opts = {});

}  // namespace ddsbl
