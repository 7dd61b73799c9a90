#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "ddsbl/dd_channel.hpp"

namespace ddsbl {

/// Received cells used for estimation: Doppler rows
/// [min N_p - k_max, max N_p + k_max] by delay columns [min M_p, max M_p + l_max],
/// vectorized row-major. Holds Q cells.
struct ObservationWindow {
  int row_begin = 0;
  int row_count = 0;
  int col_begin = 0;
  int col_count = 0;

  int size() const { return row_count * col_count; }
  bool contains(int k, int l) const {
    return k >= row_begin && k < row_begin + row_count && l >= col_begin &&
           l < col_begin + col_count;
  }
  int index(int k, int l) const { return (k - row_begin) * col_count + (l - col_begin); }
};

ObservationWindow observation_window(const SystemParams& params, const PilotLayout& layout);

/// On-grid virtual tap (delay l', Doppler k'') relative to the first pilot cell.
struct VirtualTap {
  int delay = 0;
  int doppler = 0;
  friend bool operator==(const VirtualTap&, const VirtualTap&) = default;
};

/// The R unknowns: the observation window's offsets from the first pilot cell,
/// widened by eta Doppler bins on each side. Row-major over Doppler.
struct TapGrid {
  int doppler_lo = 0;
  int doppler_count = 0;
  int delay_count = 0;

  int size() const { return doppler_count * delay_count; }
  VirtualTap tap(int r) const { return {r % delay_count, doppler_lo + r / delay_count}; }
  std::optional<int> index(VirtualTap t) const;
};

TapGrid tap_grid(const SystemParams& params, const PilotLayout& layout);

struct OtfsContext {
  SystemParams params;
  PilotLayout layout;
};

/// Linear model y = Phi h + w.
struct Measurement {
  Eigen::VectorXcd y;
  Eigen::MatrixXcd phi;
  std::optional<OtfsContext> otfs;  // absent for generic compressed-sensing problems

  Eigen::Index Q() const { return phi.rows(); }
  Eigen::Index R() const { return phi.cols(); }
};

/// Extracts y from the observation window of `rx` and builds Phi from the
/// pilot cells of `tx` using the on-grid (kappa = 0) coupling coefficients.
///
/// With a single pilot the 2 * eta * (l_max + 1) columns whose Doppler offset
/// exceeds k_max map outside the window and are identically zero.
Measurement build_measurement(const DDGrid& rx, const DDGrid& tx, const PilotLayout& layout,
                              const SystemParams& params);

/// Mask of columns of Phi with at least one nonzero entry.
std::vector<bool> observable_columns(const Eigen::MatrixXcd& phi);

/// Projects a channel onto the R-grid: the vector h such that Phi h reproduces
/// the noiseless pilot response (exactly for a single pilot; for pilot blocks
/// and fractional Doppler the phase is referenced to the first pilot cell).
Eigen::VectorXcd effective_taps(const ChannelSpec& channel, const PilotLayout& layout,
                                const SystemParams& params);

/// Generic compressed-sensing instance: i.i.d. complex Gaussian Phi with
/// unit-norm columns, a sparse CN(0,1) truth, and noise at `snr_db` relative to
/// the mean per-measurement power of Phi h. Infinite SNR gives y = Phi h.
struct GaussianProblem {
  Measurement measurement;
  Eigen::VectorXcd truth;
  double noise_var = 0.0;
};

GaussianProblem gaussian_problem(int measurements, int length, int sparsity, double snr_db,
                                 std::uint64_t seed);

}  // namespace ddsbl
