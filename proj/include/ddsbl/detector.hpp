#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <span>
#include <vector>

#include "ddsbl/dd_channel.hpp"
#include "ddsbl/measurement.hpp"

namespace ddsbl {

/// Gray-mapped square constellation. Only 4-QAM is provided.
class Constellation {
 public:
  static Constellation qam4();

  int bits_per_symbol() const { return bits_per_symbol_; }
  std::span<const cd> points() const { return points_; }

  // bits.size() must be a multiple of bits_per_symbol().
  std::vector<cd> map(std::span<const std::uint8_t> bits) const;
  // Index of the nearest point.
  int nearest(cd v) const;
  void append_bits(int point, std::vector<std::uint8_t>& out) const;

 private:
  int bits_per_symbol_ = 0;
  std::vector<cd> points_;  // index i carries bits of i, MSB first
};

/// Channel seen by the detector: a list of paths evaluated with the same
/// input-output relation as the channel generator. Estimated channels become
/// on-grid (kappa = 0) virtual taps.
struct EffectiveChannel {
  std::vector<PathParams> taps;
  SystemParams params;

  static EffectiveChannel from_channel(const ChannelSpec& channel, const SystemParams& params);
  // Taps with |h| < prune * max|h| are dropped.
  static EffectiveChannel from_estimate(const Eigen::VectorXcd& h_hat, const PilotLayout& layout,
                                        const SystemParams& params, double prune = 1e-6);
};

/// MN x MN sparse matrix of the channel; cell (k, l) maps to index k * M + l.
Eigen::SparseMatrix<cd, Eigen::RowMajor> channel_matrix(const EffectiveChannel& chan);

struct DetectionReport {
  std::vector<std::uint8_t> decided_bits;
  double ber = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct MpOptions {
  int max_iter = 30;
  double damping = 0.6;
  double tolerance = 1e-6;  // stop once no message moves by more than this
};

/// Gaussian-approximation message passing on the data cells, after removing
/// the pilot's contribution predicted by `chan`. Returns the iterate with the
/// most confident decisions; `converged` is false if no iterate had every
/// symbol probability above 0.99. Iteration also stops when the messages are
/// stationary to `tolerance`. `tx_bits` are the transmitted data bits in
/// data_cells order.
DetectionReport detect_mp(const DDGrid& rx, const PilotLayout& layout, const EffectiveChannel& chan,
                          const Constellation& constellation, double noise_var,
                          std::span<const std::uint8_t> tx_bits, const MpOptions& opts = {});

/// Linear MMSE estimate of the data symbols: (H^H H + N0 I)^-1 H^H (y - H x_pilot).
Eigen::VectorXcd lmmse_equalize(const DDGrid& rx, const PilotLayout& layout,
                                const EffectiveChannel& chan, double noise_var);

DetectionReport detect_lmmse(const DDGrid& rx, const PilotLayout& layout,
                             const EffectiveChannel& chan, double noise_var,
                             const Constellation& constellation,
                             std::span<const std::uint8_t> tx_bits);

}  // namespace ddsbl
