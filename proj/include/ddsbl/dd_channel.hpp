#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ddsbl/dd_grid.hpp"

namespace ddsbl {

/// OTFS frame geometry and channel extents.
///
/// M delay bins (subcarriers) by N Doppler bins (symbols). eta is the
/// half-width of the Doppler window used to approximate fractional Doppler,
/// l_max / k_max the largest delay and Doppler taps a path may occupy.
struct SystemParams {
  int M = 32;
  int N = 32;
  double delta_f = 15e3;  // Hz
  double fc = 4e9;        // Hz
  int eta = 3;
  int l_max = 8;
  int k_max = 6;

  void validate() const;
  double symbol_period() const { return 1.0 / delta_f; }

  // Reduced frame used by the desk-scale experiments.
  static SystemParams desk();
  // M = N = 128, l_max = 20, k_max = 16, eta = 5.
  static SystemParams paper();

  friend bool operator==(const SystemParams&, const SystemParams&) = default;
};

struct PathParams {
  cd gain{0.0, 0.0};
  int l_tau = 0;
  int k_nu = 0;
  double kappa = 0.0;  // fractional Doppler in (-0.5, 0.5)

  friend bool operator==(const PathParams&, const PathParams&) = default;
};

double path_delay_seconds(const PathParams& p, const SystemParams& params);
double path_doppler_hz(const PathParams& p, const SystemParams& params);

struct ChannelSpec {
  std::vector<PathParams> paths;

  double total_power() const;
  // Tap ranges, distinct (l_tau, k_nu) pairs, kappa range.
  void validate(const SystemParams& params) const;

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

enum class DelayProfile { Exponential, Uniform };

DelayProfile parse_delay_profile(std::string_view name);
std::string_view to_string(DelayProfile profile);

/// Rectangular pilot block at rows [row_begin, row_begin + row_count) (Doppler
/// index set) and columns [col_begin, col_begin + col_count) (delay index
/// set), all cells carrying `amplitude`. Q and R are the observation and
/// unknown counts of the resulting estimation problem.
struct PilotLayout {
  int row_begin = 0;
  int row_count = 1;
  int col_begin = 0;
  int col_count = 1;
  cd amplitude{1.0, 0.0};
  int Q = 0;
  int R = 0;

  // Pilot block at the center of the grid with Q and R filled in.
  static PilotLayout centered(const SystemParams& params, int rows = 1, int cols = 1,
                              cd amplitude = {1.0, 0.0});

  // Throws DimensionError if the pilot plus guard does not fit in the grid or
  // Q / R disagree with the block size.
  void validate(const SystemParams& params) const;

  bool is_pilot(int k, int l) const {
    return k >= row_begin && k < row_begin + row_count && l >= col_begin &&
           l < col_begin + col_count;
  }
  std::vector<int> pilot_rows() const;
  std::vector<int> pilot_cols() const;

  friend bool operator==(const PilotLayout&, const PilotLayout&) = default;
};

int observation_count(const SystemParams& params, int pilot_rows, int pilot_cols);
int unknown_count(const SystemParams& params, int pilot_rows, int pilot_cols);

/// Inclusive index ranges zeroed around the pilot.
struct GuardRegion {
  int row_lo = 0;
  int row_hi = 0;
  int col_lo = 0;
  int col_hi = 0;

  bool contains(int k, int l) const {
    return k >= row_lo && k <= row_hi && l >= col_lo && l <= col_hi;
  }
};

GuardRegion guard_region(const SystemParams& params, const PilotLayout& layout);

/// Cells available for data, in row-major (k, then l) order.
std::vector<std::pair<int, int>> data_cells(const SystemParams& params, const PilotLayout& layout);

/// Doppler leakage kernel Psi(q) for fractional offset kappa. Equals
/// (1/N) sum_n exp(j 2 pi n (-q - kappa) / N); returns 1 at the removable
/// singularity and exactly 0 for kappa = 0, q != 0 (mod N).
cd psi_coeff(int q, double kappa, int N);

/// phi_i(k, l, q): the two-branch coupling coefficient for path `path`.
cd phi_coeff(int k, int l, int q, const PathParams& path, const SystemParams& params);

/// Full coefficient multiplying x[[k - k_nu + q]_N, [l - l_tau]_M] in the
/// input-output relation: h * exp(j2pi (l - l_tau)(k_nu + kappa) / (MN)) * phi.
cd path_coefficient(int k, int l, int q, const PathParams& path, const SystemParams& params);

/// Pilot, zero guard, and data (filled in data_cells order) on one grid.
DDGrid make_pilot_frame(const SystemParams& params, const PilotLayout& layout,
                        std::optional<std::span<const cd>> data = std::nullopt);

/// Sparse doubly-dispersive channel with P paths, unit total power and
/// distinct (l_tau, k_nu) pairs.
ChannelSpec gen_channel(const SystemParams& params, int num_paths, bool fractional,
                        DelayProfile profile, std::uint64_t seed);

/// Noiseless input-output relation summed over paths and q in [-eta, eta].
DDGrid apply_channel(const DDGrid& tx, const ChannelSpec& channel, const SystemParams& params);

/// apply_channel plus circular complex Gaussian noise of variance noise_var per cell.
DDGrid synthesize_rx(const DDGrid& tx, const ChannelSpec& channel, double noise_var,
                     const SystemParams& params, std::uint64_t seed);

}  // namespace ddsbl
