#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <sstream>

#include "ddsbl/dd_channel.hpp"
#include "ddsbl/errors.hpp"
#include "ddsbl/rng.hpp"

using namespace ddsbl;
using cld = std::complex<long double>;

namespace {

constexpr long double kPiL = 3.141592653589793238462643383279502884L;

cld turns(long double t) { return std::polar(1.0L, 2.0L * kPiL * t); }

// (1/N) sum_n e^{j 2pi n (-q - kappa) / N}, summed directly in long double.
cld psi_sum(int q, long double kappa, int N) {
  cld s = 0;
  for (int n = 0; n < N; ++n) s += turns(n * (-q - kappa) / N);
  return s / static_cast<long double>(N);
}

int wrapi(int a, int n) { return ((a % n) + n) % n; }

// Two-branch coefficient written out from the definition, independent of the library.
cld phi_oracle(int k, int l, int q, int l_tau, int k_nu, long double kappa, int M, int N) {
  const cld psi = psi_sum(q, kappa, N);
  const cld base = turns((l - l_tau) * (k_nu + kappa) / (static_cast<long double>(M) * N));
  if (l >= l_tau) return psi * base;
  return (psi - 1.0L / N) * base * turns(-static_cast<long double>(wrapi(k - k_nu + q, N)) / N);
}

// Brute-force input-output relation over all (path, q).
DDGrid rx_oracle(const DDGrid& x, const ChannelSpec& ch, const SystemParams& p) {
  DDGrid y(p.N, p.M);
  for (int k = 0; k < p.N; ++k) {
    for (int l = 0; l < p.M; ++l) {
      cld acc = 0;
      for (const auto& path : ch.paths) {
        for (int q = -p.eta; q <= p.eta; ++q) {
          const cld psi = psi_sum(q, path.kappa, p.N);
          if (std::abs(psi) < 1e-15L) continue;
          const cld outer = turns((static_cast<long double>(l - path.l_tau) / p.M) *
                                  ((path.k_nu + path.kappa) / p.N));
          const cd xv = x(wrapi(k - path.k_nu + q, p.N), wrapi(l - path.l_tau, p.M));
          acc += cld(path.gain.real(), path.gain.imag()) * outer *
                 phi_oracle(k, l, q, path.l_tau, path.k_nu, path.kappa, p.M, p.N) *
                 cld(xv.real(), xv.imag());
        }
      }
      y(k, l) = cd(static_cast<double>(acc.real()), static_cast<double>(acc.imag()));
    }
  }
  return y;
}

double max_abs_diff(const DDGrid& a, const DDGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

std::vector<cd> random_symbols(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cd> v(n);
  for (auto& s : v) s = complex_normal(rng, 1.0);
  return v;
}

}  // namespace

TEST_SUITE("dd_channel") {

TEST_CASE("psi at the removable singularity and at on-grid zeros") {
  CHECK(psi_coeff(0, 0.0, 16) == cd{1.0, 0.0});
  CHECK(psi_coeff(3, 0.0, 16) == cd{0.0, 0.0});
  CHECK(psi_coeff(-7, 0.0, 16) == cd{0.0, 0.0});
}

TEST_CASE("psi matches the geometric sum") {
  const cld ref = psi_sum(1, 0.3L, 8);
  const cd got = psi_coeff(1, 0.3, 8);
  CHECK(std::abs(got - cd(ref.real(), ref.imag())) < 1e-12);

  for (int i = 0; i < 100; ++i) {
    const double kappa = -0.495 + 0.99 * i / 99.0;
    for (int q = -5; q <= 5; ++q) {
      const cld r = psi_sum(q, kappa, 32);
      CHECK(std::abs(psi_coeff(q, kappa, 32) - cd(r.real(), r.imag())) < 1e-12);
    }
  }
}

TEST_CASE("phi branches") {
  SystemParams p;
  p.M = 16;
  p.N = 8;
  p.eta = 1;
  p.l_max = 4;
  p.k_max = 2;
  const double MN = 16.0 * 8.0;

  const PathParams on_grid{{1.0, 0.0}, 2, 1, 0.0};
  const cd expect_hi = std::polar(1.0, 2 * std::numbers::pi * (5 - 2) * 1 / MN);
  CHECK(std::abs(phi_coeff(3, 5, 0, on_grid, p) - expect_hi) < 1e-15);

  const cd expect_lo = (1.0 - 1.0 / 8) * std::polar(1.0, 2 * std::numbers::pi * (1 - 2) * 1 / MN) *
                       std::polar(1.0, -2 * std::numbers::pi * wrapi(6 - 1, 8) / 8.0);
  CHECK(std::abs(phi_coeff(6, 1, 0, on_grid, p) - expect_lo) < 1e-15);

  const PathParams frac{{1.0, 0.0}, 3, 1, 0.2};
  const cld ref = phi_oracle(2, 1, -1, 3, 1, 0.2L, 16, 8);
  CHECK(std::abs(phi_coeff(2, 1, -1, frac, p) - cd(ref.real(), ref.imag())) < 1e-13);
}

TEST_CASE("single pilot frame has exactly one nonzero cell") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid g = make_pilot_frame(p, layout);
  int nonzero = 0;
  for (cd v : g.values()) nonzero += v != cd{0.0, 0.0};
  CHECK(nonzero == 1);
  CHECK(g(layout.row_begin, layout.col_begin) == cd{1.0, 0.0});
}

TEST_CASE("guard and data region sizes at full scale") {
  const SystemParams p = SystemParams::paper();
  const PilotLayout layout = PilotLayout::centered(p);
  const GuardRegion g = guard_region(p, layout);
  CHECK(g.row_hi - g.row_lo + 1 == 75);
  CHECK(g.col_hi - g.col_lo + 1 == 41);
  CHECK(g.row_lo + 37 == layout.row_begin);
  CHECK(g.col_lo + 20 == layout.col_begin);

  int enumerated = 0;
  for (int k = 0; k < p.N; ++k) {
    for (int l = 0; l < p.M; ++l) enumerated += !g.contains(k, l);
  }
  const int formula = p.M * p.N - (2 * (2 * p.k_max + p.eta) + 1) * (2 * p.l_max + 1);
  CHECK(enumerated == formula);
  CHECK(static_cast<int>(data_cells(p, layout).size()) == formula);
}

TEST_CASE("pilot frame energy and zero guard") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p, 1, 1, cd{0.6, -0.8});
  const auto cells = data_cells(p, layout);
  CHECK(cells.size() == 497);
  const auto data = random_symbols(cells.size(), 5);
  const DDGrid g = make_pilot_frame(p, layout, std::span<const cd>(data));
  double data_energy = 0.0;
  for (cd s : data) data_energy += std::norm(s);
  CHECK(g.energy() == doctest::Approx(1.0 + data_energy).epsilon(1e-12));

  const GuardRegion guard = guard_region(p, layout);
  for (int k = guard.row_lo; k <= guard.row_hi; ++k) {
    for (int l = guard.col_lo; l <= guard.col_hi; ++l) {
      if (!layout.is_pilot(k, l)) CHECK(g(k, l) == cd{0.0, 0.0});
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) CHECK(g(cells[i].first, cells[i].second) == data[i]);
}

TEST_CASE("layout and data errors") {
  SystemParams small;
  small.M = 16;
  small.N = 16;
  small.l_max = 8;
  small.k_max = 3;
  small.eta = 2;
  CHECK_THROWS_AS(PilotLayout::centered(small), DimensionError);

  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const std::vector<cd> wrong(10);
  CHECK_THROWS_AS(make_pilot_frame(p, layout, std::span<const cd>(wrong)), DimensionError);

  PilotLayout bad = layout;
  bad.Q += 1;
  CHECK_THROWS_AS(bad.validate(p), DimensionError);
}

TEST_CASE("system parameter validation") {
  SystemParams p;
  CHECK_NOTHROW(p.validate());
  p.k_max = 16;
  CHECK_THROWS(p.validate());
  p = SystemParams{};
  p.l_max = 32;
  CHECK_THROWS(p.validate());
  p = SystemParams{};
  p.delta_f = 0.0;
  CHECK_THROWS(p.validate());
}

TEST_CASE("path delay and Doppler in physical units") {
  const SystemParams p = SystemParams::paper();
  const PathParams path{{1.0, 0.0}, 4, 2, 0.25};
  CHECK(path_delay_seconds(path, p) == doctest::Approx(4.0 / (128 * 15e3)));
  CHECK(path_doppler_hz(path, p) == doctest::Approx(2.25 * 15e3 / 128));
}

TEST_CASE("gen_channel single path") {
  const ChannelSpec ch = gen_channel(SystemParams::desk(), 1, false, DelayProfile::Exponential, 3);
  REQUIRE(ch.paths.size() == 1);
  CHECK(std::abs(ch.paths[0].gain) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ch.paths[0].kappa == 0.0);
}

TEST_CASE("gen_channel is deterministic in the seed") {
  const SystemParams p = SystemParams::desk();
  CHECK(gen_channel(p, 4, true, DelayProfile::Exponential, 77) ==
        gen_channel(p, 4, true, DelayProfile::Exponential, 77));
  CHECK_FALSE(gen_channel(p, 4, true, DelayProfile::Exponential, 77) ==
              gen_channel(p, 4, true, DelayProfile::Exponential, 78));
}

TEST_CASE("gen_channel at full scale: distinct taps, unit power, valid ranges") {
  const SystemParams p = SystemParams::paper();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (auto profile : {DelayProfile::Exponential, DelayProfile::Uniform}) {
      const ChannelSpec ch = gen_channel(p, 9, true, profile, seed);
      REQUIRE(ch.paths.size() == 9);
      std::set<std::pair<int, int>> taps;
      for (const auto& path : ch.paths) {
        taps.emplace(path.l_tau, path.k_nu);
        CHECK(path.kappa > -0.5);
        CHECK(path.kappa < 0.5);
      }
      CHECK(taps.size() == 9);
      CHECK(std::abs(ch.total_power() - 1.0) < 1e-12);
      CHECK_NOTHROW(ch.validate(p));
    }
  }
}

TEST_CASE("gen_channel with more paths than delay taps and the infeasible limit") {
  const SystemParams p = SystemParams::desk();
  const ChannelSpec ch = gen_channel(p, 20, false, DelayProfile::Uniform, 9);
  CHECK_NOTHROW(ch.validate(p));
  CHECK_THROWS_AS(gen_channel(p, (p.l_max + 1) * (2 * p.k_max + 1) + 1, false,
                              DelayProfile::Uniform, 9),
                  InfeasibleError);
}

TEST_CASE("delay profile names") {
  CHECK(parse_delay_profile("uniform") == DelayProfile::Uniform);
  CHECK(to_string(parse_delay_profile("exponential")) == "exponential");
  CHECK_THROWS(parse_delay_profile("eva"));
}

TEST_CASE("identity channel returns the input") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const auto data = random_symbols(data_cells(p, layout).size(), 11);
  const DDGrid x = make_pilot_frame(p, layout, std::span<const cd>(data));
  const ChannelSpec id{{PathParams{{1.0, 0.0}, 0, 0, 0.0}}};
  CHECK(synthesize_rx(x, id, 0.0, p, 1) == x);
}

TEST_CASE("on-grid and fractional paths match the brute-force relation") {
  SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const auto data = random_symbols(data_cells(p, layout).size(), 12);
  const DDGrid x = make_pilot_frame(p, layout, std::span<const cd>(data));

  const ChannelSpec on_grid{{PathParams{{0.3, -0.7}, 2, 3, 0.0}}};
  const DDGrid y = synthesize_rx(x, on_grid, 0.0, p, 1);
  CHECK(max_abs_diff(y, rx_oracle(x, on_grid, p)) < 1e-12);

  // Only q = 0 survives: cell-by-cell closed form.
  const double MN = p.M * p.N;
  for (int k = 0; k < p.N; k += 5) {
    for (int l = 0; l < p.M; l += 3) {
      cd expect = on_grid.paths[0].gain *
                  std::polar(1.0, 2 * std::numbers::pi * ((l - 2.0) / p.M) * (3.0 / p.N)) *
                  phi_coeff(k, l, 0, on_grid.paths[0], p) * x(wrapi(k - 3, p.N), wrapi(l - 2, p.M));
      CHECK(std::abs(y(k, l) - expect) < 1e-12);
    }
  }
  (void)MN;

  const ChannelSpec mixed{{PathParams{{0.5, 0.1}, 1, -2, 0.3}, PathParams{{-0.2, 0.6}, 5, 4, -0.15}}};
  CHECK(max_abs_diff(synthesize_rx(x, mixed, 0.0, p, 1), rx_oracle(x, mixed, p)) < 1e-12);
}

TEST_CASE("fractional Doppler spreads over 2 eta + 1 rows") {
  const SystemParams p = SystemParams::paper();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid x = make_pilot_frame(p, layout);
  const ChannelSpec ch{{PathParams{{1.0, 0.0}, 3, 2, 0.25}}};
  const DDGrid y = synthesize_rx(x, ch, 0.0, p, 1);
  const int col = layout.col_begin + 3;
  std::set<int> rows;
  for (int k = 0; k < p.N; ++k) {
    if (std::abs(y(k, col)) > 1e-12) rows.insert(k);
  }
  CHECK(rows.size() == 11);
  CHECK(*rows.begin() == layout.row_begin + 2 - 5);
  CHECK(*rows.rbegin() == layout.row_begin + 2 + 5);
}

TEST_CASE("noiseless synthesis is linear in the gains") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const auto data = random_symbols(data_cells(p, layout).size(), 13);
  const DDGrid x = make_pilot_frame(p, layout, std::span<const cd>(data));
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    ChannelSpec c1 = gen_channel(p, 4, true, DelayProfile::Exponential, 100 + trial);
    ChannelSpec c2 = c1;
    for (auto& path : c2.paths) path.gain = complex_normal(rng, 1.0);
    const cd a = complex_normal(rng, 1.0), b = complex_normal(rng, 1.0);
    ChannelSpec mix = c1;
    for (std::size_t i = 0; i < mix.paths.size(); ++i) {
      mix.paths[i].gain = a * c1.paths[i].gain + b * c2.paths[i].gain;
    }
    const DDGrid y1 = synthesize_rx(x, c1, 0.0, p, 1);
    const DDGrid y2 = synthesize_rx(x, c2, 0.0, p, 1);
    const DDGrid ym = synthesize_rx(x, mix, 0.0, p, 1);
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < ym.size(); ++i) {
      const cd lin = a * y1.values()[i] + b * y2.values()[i];
      err = std::max(err, std::abs(ym.values()[i] - lin));
      ref = std::max(ref, std::abs(lin));
    }
    CHECK(err <= 1e-10 * ref);
  }
}

TEST_CASE("on-grid channel lights exactly P cells of a pilot-only frame") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid x = make_pilot_frame(p, layout);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ChannelSpec ch = gen_channel(p, 4, false, DelayProfile::Exponential, seed);
    const DDGrid y = synthesize_rx(x, ch, 0.0, p, 1);
    std::set<std::pair<int, int>> lit;
    for (int k = 0; k < p.N; ++k) {
      for (int l = 0; l < p.M; ++l) {
        if (y(k, l) != cd{0.0, 0.0}) lit.emplace(k, l);
      }
    }
    CHECK(lit.size() == 4);
    for (const auto& path : ch.paths) {
      CHECK(lit.count({layout.row_begin + path.k_nu, layout.col_begin + path.l_tau}) == 1);
    }
  }
}

TEST_CASE("additive noise has the requested variance and is seeded") {
  const SystemParams p = SystemParams::paper();
  const DDGrid zero(p.N, p.M);
  const ChannelSpec ch{{PathParams{{1.0, 0.0}, 0, 0, 0.0}}};
  const DDGrid w = synthesize_rx(zero, ch, 0.25, p, 21);
  CHECK(w.energy() / w.size() == doctest::Approx(0.25).epsilon(0.03));
  CHECK(synthesize_rx(zero, ch, 0.25, p, 21) == w);
  CHECK(synthesize_rx(zero, ch, 0.0, p, 21) == zero);
  CHECK_THROWS(synthesize_rx(zero, ch, -1.0, p, 21));
  CHECK_THROWS_AS(synthesize_rx(DDGrid(8, 8), ch, 0.0, p, 21), DimensionError);
}

TEST_CASE("grid csv round trip") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const auto data = random_symbols(data_cells(p, layout).size(), 14);
  const DDGrid x = make_pilot_frame(p, layout, std::span<const cd>(data));
  std::stringstream ss;
  x.write_csv(ss);
  CHECK(DDGrid::read_csv(ss) == x);
}

}  // TEST_SUITE
