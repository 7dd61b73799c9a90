#include "ddsbl/detector.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "ddsbl/errors.hpp"

namespace ddsbl {
namespace {

constexpr double kConfident = 0.99;
constexpr double kVarFloor = 1e-12;
// exp(-50) < 2e-22: below double resolution once the message is normalized.
constexpr double kNegligible = -50.0;

// Plain complex product; operator* goes through the inf/NaN-recovering libgcc
// routine, which dominates the message-passing loop.
inline cd mul(cd a, cd b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

int wrap(int a, int n) {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

// Received frame minus the predicted pilot response, as a vector over all MN cells.
Eigen::VectorXcd data_observation(const DDGrid& rx, const PilotLayout& layout,
                                  const EffectiveChannel& chan,
                                  const Eigen::SparseMatrix<cd, Eigen::RowMajor>& H) {
  const SystemParams& p = chan.params;
  if (rx.doppler_bins() != p.N || rx.delay_bins() != p.M) {
    throw DimensionError("received grid does not match the channel's SystemParams");
  }
  const DDGrid pilot = make_pilot_frame(p, layout);
  const auto pv = pilot.values();
  const auto rv = rx.values();
  const Eigen::Map<const Eigen::VectorXcd> x(pv.data(), static_cast<Eigen::Index>(pv.size()));
  const Eigen::Map<const Eigen::VectorXcd> y(rv.data(), static_cast<Eigen::Index>(rv.size()));
  return y - H * x;
}

// Columns of H belonging to data cells, in data_cells order.
Eigen::SparseMatrix<cd> data_columns(const Eigen::SparseMatrix<cd, Eigen::RowMajor>& H,
                                     const std::vector<std::pair<int, int>>& cells, int M) {
  std::vector<int> position(H.cols(), -1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    position[cells[i].first * M + cells[i].second] = static_cast<int>(i);
  }
  std::vector<Eigen::Triplet<cd>> trips;
  for (Eigen::Index r = 0; r < H.outerSize(); ++r) {
    for (Eigen::SparseMatrix<cd, Eigen::RowMajor>::InnerIterator it(H, r); it; ++it) {
      const int c = position[it.col()];
      if (c >= 0) trips.emplace_back(static_cast<int>(r), c, it.value());
    }
  }
  Eigen::SparseMatrix<cd> Hd(H.rows(), static_cast<Eigen::Index>(cells.size()));
  Hd.setFromTriplets(trips.begin(), trips.end());
  return Hd;
}

void score(DetectionReport& report, const std::vector<int>& decisions,
           const Constellation& constellation, std::span<const std::uint8_t> tx_bits) {
  report.decided_bits.clear();
  for (int d : decisions) constellation.append_bits(d, report.decided_bits);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < tx_bits.size(); ++i) errors += report.decided_bits[i] != tx_bits[i];
  report.ber = tx_bits.empty() ? 0.0 : static_cast<double>(errors) / tx_bits.size();
}

void check_bits(std::size_t cells, const Constellation& c, std::span<const std::uint8_t> tx_bits) {
  if (tx_bits.size() != cells * static_cast<std::size_t>(c.bits_per_symbol())) {
    throw DimensionError("transmitted bit count does not match the data cells");
  }
}

}  // namespace

Constellation Constellation::qam4() {
  Constellation c;
  c.bits_per_symbol_ = 2;
  const double s = 1.0 / std::sqrt(2.0);
  // Bit 0 selects the sign of the real part, bit 1 of the imaginary part.
  c.points_ = {{s, s}, {s, -s}, {-s, s}, {-s, -s}};
  return c;
}

std::vector<cd> Constellation::map(std::span<const std::uint8_t> bits) const {
  if (bits.size() % bits_per_symbol_ != 0) throw DimensionError("bit count not a symbol multiple");
  std::vector<cd> out;
  out.reserve(bits.size() / bits_per_symbol_);
  for (std::size_t i = 0; i < bits.size(); i += bits_per_symbol_) {
    int idx = 0;
    for (int b = 0; b < bits_per_symbol_; ++b) idx = (idx << 1) | (bits[i + b] & 1);
    out.push_back(points_[idx]);
  }
  return out;
}

int Constellation::nearest(cd v) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const double d = std::norm(v - points_[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void Constellation::append_bits(int point, std::vector<std::uint8_t>& out) const {
  for (int b = bits_per_symbol_ - 1; b >= 0; --b) out.push_back((point >> b) & 1);
}

EffectiveChannel EffectiveChannel::from_channel(const ChannelSpec& channel,
                                                const SystemParams& params) {
  return {channel.paths, params};
}

EffectiveChannel EffectiveChannel::from_estimate(const Eigen::VectorXcd& h_hat,
                                                 const PilotLayout& layout,
                                                 const SystemParams& params, double prune) {
  const TapGrid grid = tap_grid(params, layout);
  if (h_hat.size() != grid.size()) throw DimensionError("estimate length does not match R");
  if (!h_hat.allFinite()) throw std::invalid_argument("estimate has non-finite entries");
  const double cutoff = prune * (h_hat.size() ? h_hat.cwiseAbs().maxCoeff() : 0.0);
  EffectiveChannel chan{{}, params};
  for (int r = 0; r < grid.size(); ++r) {
    const double mag = std::abs(h_hat(r));
    if (mag == 0.0 || mag < cutoff) continue;
    const VirtualTap t = grid.tap(r);
    chan.taps.push_back(PathParams{h_hat(r), t.delay, t.doppler, 0.0});
  }
  return chan;
}

Eigen::SparseMatrix<cd, Eigen::RowMajor> channel_matrix(const EffectiveChannel& chan) {
  const SystemParams& p = chan.params;
  std::vector<Eigen::Triplet<cd>> trips;
  for (const auto& path : chan.taps) {
    for (int q = -p.eta; q <= p.eta; ++q) {
      if (psi_coeff(q, path.kappa, p.N) == cd{0.0, 0.0}) continue;
      for (int k = 0; k < p.N; ++k) {
        const int src_k = wrap(k - path.k_nu + q, p.N);
        for (int l = 0; l < p.M; ++l) {
          const int src = src_k * p.M + wrap(l - path.l_tau, p.M);
          trips.emplace_back(k * p.M + l, src, path_coefficient(k, l, q, path, p));
        }
      }
    }
  }
  const int n = p.M * p.N;
  Eigen::SparseMatrix<cd, Eigen::RowMajor> H(n, n);
  H.setFromTriplets(trips.begin(), trips.end());
  H.prune(cd{0.0, 0.0});
  return H;
}

DetectionReport detect_mp(const DDGrid& rx, const PilotLayout& layout, const EffectiveChannel& chan,
                          const Constellation& constellation, double noise_var,
                          std::span<const std::uint8_t> tx_bits, const MpOptions& opts) {
  if (opts.max_iter < 1 || !(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw std::invalid_argument("mp: max_iter >= 1 and damping in (0, 1] required");
  }
  if (noise_var < 0.0) throw std::invalid_argument("mp: negative noise variance");
  const SystemParams& p = chan.params;
  const auto cells = data_cells(p, layout);
  check_bits(cells.size(), constellation, tx_bits);

  const auto H = channel_matrix(chan);
  const Eigen::VectorXcd y = data_observation(rx, layout, chan, H);
  const Eigen::SparseMatrix<cd, Eigen::RowMajor> Hd = data_columns(H, cells, p.M);

  // Edge list in check (row) order, plus per-variable edge lists.
  std::vector<int> edge_var, edge_check;
  std::vector<cd> edge_h;
  std::vector<int> check_start{0};
  for (Eigen::Index r = 0; r < Hd.outerSize(); ++r) {
    for (Eigen::SparseMatrix<cd, Eigen::RowMajor>::InnerIterator it(Hd, r); it; ++it) {
      edge_var.push_back(static_cast<int>(it.col()));
      edge_check.push_back(static_cast<int>(r));
      edge_h.push_back(it.value());
    }
    check_start.push_back(static_cast<int>(edge_var.size()));
  }
  const std::size_t D = cells.size();
  const std::size_t E = edge_var.size();
  std::vector<std::vector<int>> var_edges(D);
  for (std::size_t e = 0; e < E; ++e) var_edges[edge_var[e]].push_back(static_cast<int>(e));

  const auto pts = constellation.points();
  const std::size_t A = pts.size();
  std::vector<double> prob(E * A, 1.0 / A);  // variable -> check messages
  std::vector<double> mean_re(E), mean_im(E), var(E), mu_re(E), mu_im(E), sigma2(E);
  std::vector<double> loglik(E * A), total(A), fresh(A);
  std::vector<cd> edge_point(E * A);  // h_e * s_a
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t a = 0; a < A; ++a) edge_point[e * A + a] = mul(edge_h[e], pts[a]);
  }

  DetectionReport report;
  report.converged = false;
  std::vector<int> decisions(D, 0), best_decisions(D, 0);
  double best_conf = -1.0;

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    for (std::size_t e = 0; e < E; ++e) {
      cd m{0.0, 0.0};
      double s2 = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        m += prob[e * A + a] * pts[a];
        s2 += prob[e * A + a] * std::norm(pts[a]);
      }
      mean_re[e] = m.real();
      mean_im[e] = m.imag();
      var[e] = std::max(s2 - std::norm(m), 0.0);
    }
    // Check nodes: Gaussian approximation of the interference on each edge.
    for (std::size_t d = 0; d + 1 < check_start.size(); ++d) {
      cd sum_mean{0.0, 0.0};
      double sum_var = 0.0;
      for (int e = check_start[d]; e < check_start[d + 1]; ++e) {
        sum_mean += mul(edge_h[e], cd{mean_re[e], mean_im[e]});
        sum_var += std::norm(edge_h[e]) * var[e];
      }
      for (int e = check_start[d]; e < check_start[d + 1]; ++e) {
        const cd mu = sum_mean - mul(edge_h[e], cd{mean_re[e], mean_im[e]});
        mu_re[e] = mu.real();
        mu_im[e] = mu.imag();
        sigma2[e] = std::max(std::max(sum_var - std::norm(edge_h[e]) * var[e], 0.0) + noise_var,
                             kVarFloor);
      }
    }
    for (std::size_t e = 0; e < E; ++e) {
      const cd resid = y(edge_check[e]) - cd{mu_re[e], mu_im[e]};
      for (std::size_t a = 0; a < A; ++a) {
        loglik[e * A + a] = -std::norm(resid - edge_point[e * A + a]) / sigma2[e];
      }
    }
    // Variable nodes: extrinsic messages with damping, and full posteriors.
    double confident = 0.0;
    double shift = 0.0;  // largest message change this iteration
    for (std::size_t c = 0; c < D; ++c) {
      std::fill(total.begin(), total.end(), 0.0);
      for (int e : var_edges[c]) {
        for (std::size_t a = 0; a < A; ++a) total[a] += loglik[e * A + a];
      }
      for (int e : var_edges[c]) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < A; ++a) {
          fresh[a] = total[a] - loglik[e * A + a];
          peak = std::max(peak, fresh[a]);
        }
        double norm = 0.0;
        for (std::size_t a = 0; a < A; ++a) {
          const double gap = fresh[a] - peak;
          norm += (fresh[a] = gap < kNegligible ? 0.0 : std::exp(gap));
        }
        for (std::size_t a = 0; a < A; ++a) {
          double& msg = prob[e * A + a];
          const double next = opts.damping * fresh[a] / norm + (1.0 - opts.damping) * msg;
          shift = std::max(shift, std::abs(next - msg));
          msg = next;
        }
      }
      const double peak = *std::max_element(total.begin(), total.end());
      double norm = 0.0;
      for (std::size_t a = 0; a < A; ++a) {
        const double gap = total[a] - peak;
        if (gap >= kNegligible) norm += std::exp(gap);
      }
      const auto top = std::max_element(total.begin(), total.end()) - total.begin();
      decisions[c] = static_cast<int>(top);
      if (1.0 / norm >= kConfident) confident += 1.0;
    }
    report.iterations = iter;
    const double conf = D ? confident / D : 1.0;
    if (conf > best_conf) {
      best_conf = conf;
      best_decisions = decisions;
    }
    if (conf >= 1.0) {
      report.converged = true;
      break;
    }
    if (shift < opts.tolerance) break;  // stationary but not confident
  }
  score(report, best_decisions, constellation, tx_bits);
  return report;
}

Eigen::VectorXcd lmmse_equalize(const DDGrid& rx, const PilotLayout& layout,
                                const EffectiveChannel& chan, double noise_var) {
  if (noise_var < 0.0) throw std::invalid_argument("lmmse: negative noise variance");
  const SystemParams& p = chan.params;
  const auto cells = data_cells(p, layout);
  const auto H = channel_matrix(chan);
  const Eigen::VectorXcd y = data_observation(rx, layout, chan, H);
  const Eigen::SparseMatrix<cd> Hd = data_columns(H, cells, p.M);

  Eigen::SparseMatrix<cd> A = Hd.adjoint() * Hd;
  Eigen::SparseMatrix<cd> eye(A.rows(), A.cols());
  eye.setIdentity();
  A += noise_var * eye;
  const Eigen::VectorXcd rhs = Hd.adjoint() * y;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<cd>> ldlt(A);
  double jitter = 1e-12 * std::max(A.diagonal().real().sum() / std::max<Eigen::Index>(A.rows(), 1), 1e-300);
  for (int attempt = 0; ldlt.info() != Eigen::Success; ++attempt) {
    if (attempt == 20) throw DivergenceError("lmmse: normal equations not factorizable");
    A += jitter * eye;
    jitter *= 10.0;
    ldlt.compute(A);
  }
  return ldlt.solve(rhs);
}

DetectionReport detect_lmmse(const DDGrid& rx, const PilotLayout& layout,
                             const EffectiveChannel& chan, double noise_var,
                             const Constellation& constellation,
                             std::span<const std::uint8_t> tx_bits) {
  const auto cells = data_cells(chan.params, layout);
  check_bits(cells.size(), constellation, tx_bits);
  const Eigen::VectorXcd xhat = lmmse_equalize(rx, layout, chan, noise_var);
  std::vector<int> decisions(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) decisions[i] = constellation.nearest(xhat(i));
  DetectionReport report;
  score(report, decisions, constellation, tx_bits);
  return report;
}

}  // namespace ddsbl
