#include "ddsbl/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ddsbl/errors.hpp"
#include "ddsbl/rng.hpp"

namespace ddsbl {
namespace {

int wrap(int a, int n) {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

// Coefficient of an on-grid unit tap at (delay, doppler) seen at cell (k, l).
cd atom(int k, int l, VirtualTap t, const SystemParams& params) {
  const PathParams unit{cd{1.0, 0.0}, t.delay, t.doppler, 0.0};
  return path_coefficient(k, l, 0, unit, params);
}

}  // namespace

ObservationWindow observation_window(const SystemParams& params, const PilotLayout& layout) {
  return ObservationWindow{layout.row_begin - params.k_max, 2 * params.k_max + layout.row_count,
                           layout.col_begin, params.l_max + layout.col_count};
}

std::optional<int> TapGrid::index(VirtualTap t) const {
  const int row = t.doppler - doppler_lo;
  if (row < 0 || row >= doppler_count || t.delay < 0 || t.delay >= delay_count) return std::nullopt;
  return row * delay_count + t.delay;
}

TapGrid tap_grid(const SystemParams& params, const PilotLayout& layout) {
  return TapGrid{-params.k_max - params.eta, 2 * params.k_max + layout.row_count + 2 * params.eta,
                 params.l_max + layout.col_count};
}

Measurement build_measurement(const DDGrid& rx, const DDGrid& tx, const PilotLayout& layout,
                              const SystemParams& params) {
  params.validate();
  layout.validate(params);
  for (const DDGrid* g : {&rx, &tx}) {
    if (g->doppler_bins() != params.N || g->delay_bins() != params.M) {
      throw DimensionError("received/transmitted grid does not match SystemParams");
    }
  }
  const ObservationWindow win = observation_window(params, layout);
  const TapGrid grid = tap_grid(params, layout);

  Measurement m;
  m.otfs = OtfsContext{params, layout};
  m.y.resize(win.size());
  for (int k = win.row_begin; k < win.row_begin + win.row_count; ++k) {
    for (int l = win.col_begin; l < win.col_begin + win.col_count; ++l) {
      m.y(win.index(k, l)) = rx(k, l);
    }
  }

  m.phi = Eigen::MatrixXcd::Zero(win.size(), grid.size());
  for (int r = 0; r < grid.size(); ++r) {
    const VirtualTap t = grid.tap(r);
    for (int kp : layout.pilot_rows()) {
      for (int lp : layout.pilot_cols()) {
        const cd pilot = tx(kp, lp);
        const int k = wrap(kp + t.doppler, params.N);
        const int l = wrap(lp + t.delay, params.M);
        if (!win.contains(k, l)) continue;
        m.phi(win.index(k, l), r) += pilot * atom(k, l, t, params);
      }
    }
  }
  return m;
}

std::vector<bool> observable_columns(const Eigen::MatrixXcd& phi) {
  std::vector<bool> mask(phi.cols());
  for (Eigen::Index c = 0; c < phi.cols(); ++c) mask[c] = phi.col(c).squaredNorm() > 0.0;
  return mask;
}

Eigen::VectorXcd effective_taps(const ChannelSpec& channel, const PilotLayout& layout,
                                const SystemParams& params) {
  const TapGrid grid = tap_grid(params, layout);
  Eigen::VectorXcd h = Eigen::VectorXcd::Zero(grid.size());
  const int kp = layout.row_begin;
  const int lp = layout.col_begin;
  for (const auto& path : channel.paths) {
    for (int q = -params.eta; q <= params.eta; ++q) {
      if (psi_coeff(q, path.kappa, params.N) == cd{0.0, 0.0}) continue;
      const VirtualTap t{path.l_tau, path.k_nu - q};
      const auto r = grid.index(t);
      if (!r) throw DimensionError("channel tap falls outside the unknown grid");
      const int k = wrap(kp + t.doppler, params.N);
      const int l = wrap(lp + t.delay, params.M);
      h(*r) += path_coefficient(k, l, q, path, params) / atom(k, l, t, params);
    }
  }
  return h;
}

GaussianProblem gaussian_problem(int measurements, int length, int sparsity, double snr_db,
                                 std::uint64_t seed) {
  if (measurements < 1 || length < 1 || sparsity < 1 || sparsity > length) {
    throw InfeasibleError("invalid compressed-sensing dimensions");
  }
  Rng rng(seed);
  GaussianProblem p;
  Eigen::MatrixXcd phi(measurements, length);
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    for (Eigen::Index r = 0; r < phi.rows(); ++r) phi(r, c) = complex_normal(rng, 1.0);
    phi.col(c).normalize();
  }

  std::vector<int> order(length);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates keeps the draw sequence independent of the library's shuffle.
  for (int i = 0; i < sparsity; ++i) {
    std::uniform_int_distribution<int> pick(i, length - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  p.truth = Eigen::VectorXcd::Zero(length);
  for (int i = 0; i < sparsity; ++i) p.truth(order[i]) = complex_normal(rng, 1.0);

  Eigen::VectorXcd y = phi * p.truth;
  if (std::isfinite(snr_db)) {
    p.noise_var = y.squaredNorm() / measurements * std::pow(10.0, -snr_db / 10.0);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += complex_normal(rng, p.noise_var);
  }
  p.measurement.y = std::move(y);
  p.measurement.phi = std::move(phi);
  return p;
}

}  // namespace ddsbl
