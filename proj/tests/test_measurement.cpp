#include <doctest.h>

#include <cmath>
#include <set>

#include "ddsbl/errors.hpp"
#include "ddsbl/measurement.hpp"

using namespace ddsbl;

TEST_SUITE("measurement") {

TEST_CASE("observation and unknown counts") {
  const SystemParams paper = SystemParams::paper();
  CHECK(observation_count(paper, 1, 1) == 693);
  CHECK(unknown_count(paper, 1, 1) == 903);
  const SystemParams desk = SystemParams::desk();
  CHECK(observation_count(desk, 1, 1) == 117);
  CHECK(unknown_count(desk, 1, 1) == 171);
  const PilotLayout layout = PilotLayout::centered(desk);
  CHECK(observation_window(desk, layout).size() == layout.Q);
  CHECK(tap_grid(desk, layout).size() == layout.R);
}

TEST_CASE("tap grid indexing round trips") {
  const SystemParams p = SystemParams::desk();
  const TapGrid g = tap_grid(p, PilotLayout::centered(p));
  CHECK(g.doppler_lo == -p.k_max - p.eta);
  for (int r = 0; r < g.size(); ++r) CHECK(g.index(g.tap(r)) == r);
  CHECK_FALSE(g.index({-1, 0}).has_value());
  CHECK_FALSE(g.index({0, g.doppler_lo - 1}).has_value());
}

TEST_CASE("dictionary reproduces the noiseless pilot response for on-grid channels") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid tx = make_pilot_frame(p, layout);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ChannelSpec ch = gen_channel(p, 4, false, DelayProfile::Exponential, 1000 + seed);
    const Measurement m = build_measurement(apply_channel(tx, ch, p), tx, layout, p);
    const Eigen::VectorXcd h = effective_taps(ch, layout, p);
    CHECK((m.y - m.phi * h).norm() / m.y.norm() < 1e-10);
    CHECK((h.array() != cd{0.0, 0.0}).count() == 4);
  }
}

TEST_CASE("fractional channels are reproduced for a single pilot") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid tx = make_pilot_frame(p, layout);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ChannelSpec ch = gen_channel(p, 4, true, DelayProfile::Exponential, 2000 + seed);
    const Measurement m = build_measurement(apply_channel(tx, ch, p), tx, layout, p);
    const Eigen::VectorXcd h = effective_taps(ch, layout, p);
    CHECK((m.y - m.phi * h).norm() / m.y.norm() < 1e-10);
  }
}

TEST_CASE("window of a noise-free, channel-free frame holds only the pilot echo") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid tx = make_pilot_frame(p, layout);
  const ChannelSpec id{{PathParams{{1.0, 0.0}, 0, 0, 0.0}}};
  const Measurement m = build_measurement(apply_channel(tx, id, p), tx, layout, p);
  const ObservationWindow w = observation_window(p, layout);
  CHECK(m.y.norm() == doctest::Approx(1.0));
  CHECK(m.y(w.index(layout.row_begin, layout.col_begin)) == cd{1.0, 0.0});
}

TEST_CASE("single pilot leaves 2 eta (l_max + 1) columns unobserved") {
  for (const SystemParams& p : {SystemParams::desk(), SystemParams::paper()}) {
    const PilotLayout layout = PilotLayout::centered(p);
    const DDGrid tx = make_pilot_frame(p, layout);
    const Measurement m = build_measurement(tx, tx, layout, p);
    const auto mask = observable_columns(m.phi);
    const long zero = std::count(mask.begin(), mask.end(), false);
    CHECK(zero == 2 * p.eta * (p.l_max + 1));
    // Every observed column is a single pilot-weighted entry.
    for (Eigen::Index c = 0; c < m.R(); ++c) {
      if (!mask[static_cast<std::size_t>(c)]) continue;
      CHECK((m.phi.col(c).array() != cd{0.0, 0.0}).count() == 1);
      CHECK(m.phi.col(c).norm() == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("build_measurement rejects mismatched grids") {
  const SystemParams p = SystemParams::desk();
  const PilotLayout layout = PilotLayout::centered(p);
  const DDGrid tx = make_pilot_frame(p, layout);
  CHECK_THROWS_AS(build_measurement(DDGrid(8, 8), tx, layout, p), DimensionError);
  CHECK_THROWS_AS(build_measurement(tx, DDGrid(8, 8), layout, p), DimensionError);
}

TEST_CASE("gaussian problem shape and support") {
  const GaussianProblem g = gaussian_problem(30, 60, 5, 20.0, 3);
  CHECK(g.measurement.Q() == 30);
  CHECK(g.measurement.R() == 60);
  CHECK_FALSE(g.measurement.otfs.has_value());
  CHECK((g.truth.array() != cd{0.0, 0.0}).count() == 5);
  for (Eigen::Index c = 0; c < 60; ++c) CHECK(g.measurement.phi.col(c).norm() == doctest::Approx(1.0));
  const double signal = (g.measurement.phi * g.truth).squaredNorm() / 30.0;
  CHECK(g.noise_var == doctest::Approx(signal / 100.0));

  const GaussianProblem clean = gaussian_problem(30, 60, 5, INFINITY, 3);
  CHECK(clean.noise_var == 0.0);
  CHECK((clean.measurement.y - clean.measurement.phi * clean.truth).norm() == 0.0);
  CHECK(gaussian_problem(30, 60, 5, 20.0, 3).measurement.y == g.measurement.y);
  CHECK_THROWS_AS(gaussian_problem(30, 60, 61, 20.0, 3), InfeasibleError);
}

}  // TEST_SUITE
