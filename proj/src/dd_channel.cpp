#include "ddsbl/dd_channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "ddsbl/errors.hpp"
#include "ddsbl/rng.hpp"

namespace ddsbl {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int wrap(int a, int n) {
  const int r = a % n;
  return r < 0 ? r + n : r;
}

cd unit_phasor(double turns) { return std::polar(1.0, kTwoPi * turns); }

}  // namespace

void SystemParams::validate() const {
  std::ostringstream err;
  if (M < 1 || N < 1) err << "M and N must be >= 1; ";
  if (eta < 0) err << "eta must be >= 0; ";
  if (l_max < 0 || l_max >= M) err << "l_max must lie in [0, M); ";
  if (k_max < 0 || 2 * k_max >= N) err << "k_max must satisfy 0 <= k_max < N/2; ";
  if (!(delta_f > 0.0)) err << "delta_f must be positive; ";
  if (!err.str().empty()) throw std::invalid_argument("SystemParams: " + err.str());
}

SystemParams SystemParams::desk() { return SystemParams{}; }

SystemParams SystemParams::paper() {
  SystemParams p;
  p.M = 128;
  p.N = 128;
  p.eta = 5;
  p.l_max = 20;
  p.k_max = 16;
  return p;
}

double path_delay_seconds(const PathParams& p, const SystemParams& params) {
  return p.l_tau / (params.M * params.delta_f);
}

double path_doppler_hz(const PathParams& p, const SystemParams& params) {
  return (p.k_nu + p.kappa) / (params.N * params.symbol_period());
}

double ChannelSpec::total_power() const {
  double s = 0.0;
  for (const auto& p : paths) s += std::norm(p.gain);
  return s;
}

void ChannelSpec::validate(const SystemParams& params) const {
  if (paths.empty()) throw std::invalid_argument("ChannelSpec needs at least one path");
  std::set<std::pair<int, int>> taps;
  for (const auto& p : paths) {
    if (p.l_tau < 0 || p.l_tau > params.l_max) {
      throw std::invalid_argument("path delay tap outside [0, l_max]");
    }
    if (std::abs(p.k_nu) > params.k_max) {
      throw std::invalid_argument("path Doppler tap outside [-k_max, k_max]");
    }
    if (!(p.kappa > -0.5 && p.kappa < 0.5)) {
      throw std::invalid_argument("fractional Doppler outside (-0.5, 0.5)");
    }
    if (!taps.emplace(p.l_tau, p.k_nu).second) {
      throw std::invalid_argument("two paths share a (l_tau, k_nu) pair");
    }
  }
}

DelayProfile parse_delay_profile(std::string_view name) {
  if (name == "exponential") return DelayProfile::Exponential;
  if (name == "uniform") return DelayProfile::Uniform;
  throw std::invalid_argument("unknown delay profile: " + std::string(name));
}

std::string_view to_string(DelayProfile profile) {
  return profile == DelayProfile::Exponential ? "exponential" : "uniform";
}

int observation_count(const SystemParams& params, int pilot_rows, int pilot_cols) {
  return (2 * params.k_max + pilot_rows) * (params.l_max + pilot_cols);
}

int unknown_count(const SystemParams& params, int pilot_rows, int pilot_cols) {
  return (2 * params.k_max + pilot_rows + 2 * params.eta) * (params.l_max + pilot_cols);
}

PilotLayout PilotLayout::centered(const SystemParams& params, int rows, int cols, cd amplitude) {
  params.validate();
  PilotLayout layout;
  layout.row_count = rows;
  layout.col_count = cols;
  layout.row_begin = params.N / 2 - rows / 2;
  layout.col_begin = params.M / 2 - cols / 2;
  layout.amplitude = amplitude;
  layout.Q = observation_count(params, rows, cols);
  layout.R = unknown_count(params, rows, cols);
  layout.validate(params);
  return layout;
}

void PilotLayout::validate(const SystemParams& params) const {
  if (row_count < 1 || col_count < 1) throw DimensionError("pilot block must be non-empty");
  if (amplitude == cd{0.0, 0.0}) throw std::invalid_argument("pilot amplitude must be nonzero");
  const GuardRegion g = guard_region(params, *this);
  if (g.row_lo < 0 || g.row_hi >= params.N || g.col_lo < 0 || g.col_hi >= params.M) {
    std::ostringstream os;
    os << "pilot + guard rows [" << g.row_lo << ", " << g.row_hi << "] x cols [" << g.col_lo
       << ", " << g.col_hi << "] overflow the " << params.N << "x" << params.M << " grid";
    throw DimensionError(os.str());
  }
  if (Q != observation_count(params, row_count, col_count) ||
      R != unknown_count(params, row_count, col_count)) {
    throw DimensionError("PilotLayout Q/R do not match the pilot block size");
  }
}

std::vector<int> PilotLayout::pilot_rows() const {
  std::vector<int> v(row_count);
  for (int i = 0; i < row_count; ++i) v[i] = row_begin + i;
  return v;
}

std::vector<int> PilotLayout::pilot_cols() const {
  std::vector<int> v(col_count);
  for (int i = 0; i < col_count; ++i) v[i] = col_begin + i;
  return v;
}

GuardRegion guard_region(const SystemParams& params, const PilotLayout& layout) {
  const int row_ext = 2 * params.k_max + params.eta;
  return GuardRegion{layout.row_begin - row_ext, layout.row_begin + layout.row_count - 1 + row_ext,
                     layout.col_begin - params.l_max,
                     layout.col_begin + layout.col_count - 1 + params.l_max};
}

std::vector<std::pair<int, int>> data_cells(const SystemParams& params, const PilotLayout& layout) {
  const GuardRegion g = guard_region(params, layout);
  std::vector<std::pair<int, int>> cells;
  cells.reserve(static_cast<std::size_t>(params.M) * params.N);
  for (int k = 0; k < params.N; ++k) {
    for (int l = 0; l < params.M; ++l) {
      if (!g.contains(k, l)) cells.emplace_back(k, l);
    }
  }
  return cells;
}

cd psi_coeff(int q, double kappa, int N) {
  if (kappa == 0.0 && wrap(q, N) != 0) return {0.0, 0.0};
  const double x = -q - kappa;
  const double r = x / N;
  if (std::abs(r - std::round(r)) < 1e-13) return {1.0, 0.0};
  // (e^{j2pi x} - 1) / (N (e^{j2pi x/N} - 1)) rewritten with half-angle sines.
  const double num = std::sin(std::numbers::pi * x);
  const double den = N * std::sin(std::numbers::pi * x / N);
  return (num / den) * std::polar(1.0, std::numbers::pi * x * (1.0 - 1.0 / N));
}

cd phi_coeff(int k, int l, int q, const PathParams& path, const SystemParams& params) {
  const double MN = static_cast<double>(params.M) * params.N;
  const cd psi = psi_coeff(q, path.kappa, params.N);
  const cd base = unit_phasor((l - path.l_tau) * (path.k_nu + path.kappa) / MN);
  if (l >= path.l_tau) return psi * base;
  const int wrapped = wrap(k - path.k_nu + q, params.N);
  return (psi - 1.0 / params.N) * base * unit_phasor(-static_cast<double>(wrapped) / params.N);
}

cd path_coefficient(int k, int l, int q, const PathParams& path, const SystemParams& params) {
  const cd outer = unit_phasor((static_cast<double>(l - path.l_tau) / params.M) *
                               ((path.k_nu + path.kappa) / params.N));
  return path.gain * outer * phi_coeff(k, l, q, path, params);
}

DDGrid make_pilot_frame(const SystemParams& params, const PilotLayout& layout,
                        std::optional<std::span<const cd>> data) {
  params.validate();
  layout.validate(params);
  DDGrid grid(params.N, params.M);
  for (int k : layout.pilot_rows()) {
    for (int l : layout.pilot_cols()) grid(k, l) = layout.amplitude;
  }
  if (data) {
    const auto cells = data_cells(params, layout);
    if (data->size() != cells.size()) {
      std::ostringstream os;
      os << "data stream has " << data->size() << " symbols, frame holds " << cells.size();
      throw DimensionError(os.str());
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      grid(cells[i].first, cells[i].second) = (*data)[i];
    }
  }
  return grid;
}

ChannelSpec gen_channel(const SystemParams& params, int num_paths, bool fractional,
                        DelayProfile profile, std::uint64_t seed) {
  params.validate();
  const int delay_taps = params.l_max + 1;
  const long capacity = static_cast<long>(delay_taps) * (2 * params.k_max + 1);
  if (num_paths < 1 || num_paths > capacity) {
    std::ostringstream os;
    os << "cannot place " << num_paths << " distinct paths on " << capacity << " (delay, Doppler) taps";
    throw InfeasibleError(os.str());
  }

  Rng rng(seed);
  std::vector<double> weight(delay_taps, 1.0);
  if (profile == DelayProfile::Exponential && params.l_max > 0) {
    const double decay = params.l_max / 3.0;
    for (int l = 0; l < delay_taps; ++l) weight[l] = std::exp(-l / decay);
  }

  // Delay taps: without replacement while enough taps exist, otherwise with
  // replacement and pair-level rejection below.
  const bool distinct_delays = num_paths <= delay_taps;
  std::vector<int> delays;
  {
    std::vector<double> w = weight;
    for (int i = 0; i < num_paths; ++i) {
      std::discrete_distribution<int> pick(w.begin(), w.end());
      const int l = pick(rng);
      delays.push_back(l);
      if (distinct_delays) w[l] = 0.0;
    }
  }

  std::uniform_real_distribution<double> angle(0.0, kTwoPi);
  std::uniform_real_distribution<double> frac(-0.5, 0.5);
  std::set<std::pair<int, int>> used;
  ChannelSpec spec;
  spec.paths.reserve(num_paths);
  std::discrete_distribution<int> redraw_delay(weight.begin(), weight.end());
  constexpr int kMaxAttempts = 1'000'000;
  for (int i = 0; i < num_paths; ++i) {
    PathParams p;
    p.l_tau = delays[i];
    int attempts = 0;
    for (;;) {
      p.k_nu = static_cast<int>(std::lround(params.k_max * std::cos(angle(rng))));
      if (used.emplace(p.l_tau, p.k_nu).second) break;
      if (++attempts > kMaxAttempts) throw InfeasibleError("rejection sampling of taps did not terminate");
      if (!distinct_delays) p.l_tau = redraw_delay(rng);
    }
    spec.paths.push_back(p);
  }
  for (auto& p : spec.paths) {
    p.gain = complex_normal(rng, 1.0) * std::sqrt(weight[p.l_tau]);
    if (fractional) {
      double kappa = frac(rng);
      while (kappa <= -0.5) kappa = frac(rng);
      p.kappa = kappa;
    }
  }
  const double norm = std::sqrt(spec.total_power());
  for (auto& p : spec.paths) p.gain /= norm;
  return spec;
}

DDGrid apply_channel(const DDGrid& tx, const ChannelSpec& channel, const SystemParams& params) {
  params.validate();
  if (tx.doppler_bins() != params.N || tx.delay_bins() != params.M) {
    throw DimensionError("transmit grid does not match SystemParams");
  }
  DDGrid rx(params.N, params.M);
  for (const auto& path : channel.paths) {
    for (int q = -params.eta; q <= params.eta; ++q) {
      if (psi_coeff(q, path.kappa, params.N) == cd{0.0, 0.0}) continue;
      for (int k = 0; k < params.N; ++k) {
        const int src_k = wrap(k - path.k_nu + q, params.N);
        for (int l = 0; l < params.M; ++l) {
          const cd x = tx(src_k, wrap(l - path.l_tau, params.M));
          if (x == cd{0.0, 0.0}) continue;
          rx(k, l) += path_coefficient(k, l, q, path, params) * x;
        }
      }
    }
  }
  return rx;
}

DDGrid synthesize_rx(const DDGrid& tx, const ChannelSpec& channel, double noise_var,
                     const SystemParams& params, std::uint64_t seed) {
  if (noise_var < 0.0) throw std::invalid_argument("noise variance must be non-negative");
  DDGrid rx = apply_channel(tx, channel, params);
  if (noise_var > 0.0) {
    Rng rng(seed);
    for (cd& v : rx.values()) v += complex_normal(rng, noise_var);
  }
  return rx;
}

}  // namespace ddsbl
