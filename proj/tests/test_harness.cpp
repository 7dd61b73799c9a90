#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ddsbl/config.hpp"
#include "ddsbl/harness.hpp"
#include "ddsbl/rng.hpp"

using namespace ddsbl;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_nmse() {
  ExperimentConfig cfg = default_config(ExperimentKind::NmseSweep, Scale::Desk);
  cfg.trials = 3;
  cfg.snr_db = {3.0, 15.0};
  cfg.hyper.max_iter = 40;
  return cfg;
}

std::string summary(const RunResult& r) {
  std::ostringstream os;
  write_summary_csv(r, os);
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

const CsvRow* find_row(const RunResult& r, const std::string& algo, const std::string& stat,
                       double axis) {
  for (const auto& row : r.rows) {
    if (row.algorithm == algo && row.stat == stat && row.axis_value == axis) return &row;
  }
  return nullptr;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ddsbl_test_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("same config and seed give byte-identical CSV regardless of worker count") {
  const ExperimentConfig cfg = small_nmse();
  setenv("DDSBL_WORKERS", "1", 1);
  CHECK(worker_count() == 1);
  const std::string one = summary(run_nmse_sweep(cfg));
  setenv("DDSBL_WORKERS", "3", 1);
  CHECK(worker_count() == 3);
  const std::string three = summary(run_nmse_sweep(cfg));
  unsetenv("DDSBL_WORKERS");
  CHECK(one == three);
  CHECK(one.rfind("experiment,algorithm,axis,axis_value,stat,value,n_trials\n", 0) == 0);

  ExperimentConfig other = cfg;
  other.seed = 2;
  CHECK(summary(run_nmse_sweep(other)) != one);
}

TEST_CASE("trial seeds follow base xor f(t) and subsets reproduce") {
  ExperimentConfig cfg = small_nmse();
  cfg.algorithms = {"omp", "ifsbl"};
  const RunResult five = [&] {
    ExperimentConfig c = cfg;
    c.trials = 5;
    return run_nmse_sweep(c);
  }();
  const RunResult three = run_nmse_sweep(cfg);
  for (const auto& t : three.trials) {
    CHECK(t.seed == trial_seed(cfg.seed, static_cast<std::uint64_t>(t.trial)));
    bool matched = false;
    for (const auto& u : five.trials) {
      if (u.algorithm == t.algorithm && u.axis_value == t.axis_value && u.trial == t.trial) {
        matched = u.nmse_db == t.nmse_db && u.seed == t.seed;
      }
    }
    CHECK(matched);
  }
}

TEST_CASE("noiseless on-grid channel puts OMP at the NMSE floor") {
  ExperimentConfig cfg = small_nmse();
  cfg.trials = 1;
  cfg.fractional = false;
  cfg.algorithms = {"omp"};
  cfg.snr_db = {std::numeric_limits<double>::infinity()};
  const RunResult r = run_nmse_sweep(cfg);
  const CsvRow* row = find_row(r, "omp", "nmse_db_mean", cfg.snr_db[0]);
  REQUIRE(row != nullptr);
  CHECK(row->value == -300.0);
  CHECK(row->n_trials == 1);
  CHECK(summary(r).find(",inf,") != std::string::npos);
}

TEST_CASE("perfect CSI without noise gives a zero-BER row") {
  ExperimentConfig cfg = default_config(ExperimentKind::BerSweep, Scale::Desk);
  cfg.trials = 2;
  cfg.algorithms = {"omp"};
  cfg.snr_db = {std::numeric_limits<double>::infinity()};
  const RunResult r = run_ber_sweep(cfg);
  const CsvRow* row = find_row(r, "perfect_csi", "ber", cfg.snr_db[0]);
  REQUIRE(row != nullptr);
  CHECK(row->value == 0.0);
  CHECK(r.failed_cells == 0);
}

TEST_CASE("convergence run with a one-iteration cap traces one step") {
  ExperimentConfig cfg = default_config(ExperimentKind::Convergence, Scale::Desk);
  cfg.trials = 1;
  cfg.hyper.max_iter = 1;
  const RunResult r = run_convergence(cfg);
  REQUIRE(r.trials.size() == cfg.algorithms.size());
  for (const auto& t : r.trials) CHECK(t.trace.size() == 1);
  std::ostringstream os;
  write_traces_csv(r, os);
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + static_cast<long>(cfg.algorithms.size()));
}

TEST_CASE("fully determined noiseless problem succeeds for every algorithm") {
  ExperimentConfig cfg = default_config(ExperimentKind::SuccessRate, Scale::Desk);
  cfg.trials = 3;
  cfg.generic.length = 40;
  cfg.generic.sparsity = 4;
  cfg.generic.measurement_grid = {40};
  cfg.generic.snr_db.reset();
  const RunResult r = run_success_rate(cfg);
  for (const auto& algo : cfg.algorithms) {
    const CsvRow* row = find_row(r, algo, "success_rate", 40.0);
    REQUIRE(row != nullptr);
    CHECK(row->value == 1.0);
  }
}

TEST_CASE("config survives a JSON round trip") {
  for (auto kind : {ExperimentKind::NmseSweep, ExperimentKind::BerSweep, ExperimentKind::Convergence,
                    ExperimentKind::SuccessRate}) {
    for (auto scale : {Scale::Desk, Scale::Paper}) {
      ExperimentConfig cfg = default_config(kind, scale);
      cfg.hyper.init_alpha = 0.5;
      cfg.omp.sparsity = 7;
      cfg.pilot_amplitude = {0.25, -2.0};
      CHECK(parse_config(config_to_json(cfg), ExperimentConfig{}) == cfg);
    }
  }
}

TEST_CASE("partial config overlays the base") {
  const ExperimentConfig base = default_config(ExperimentKind::NmseSweep, Scale::Desk);
  const ExperimentConfig cfg =
      parse_config(R"({"trials": 7, "system": {"eta": 2}, "hyper": {"varsigma": 4}})", base);
  CHECK(cfg.trials == 7);
  CHECK(cfg.system.eta == 2);
  CHECK(cfg.hyper.varsigma == 4.0);
  CHECK(cfg.system.M == base.system.M);
  CHECK_THROWS(parse_config("{\"trials\": 0}", base));
  CHECK_THROWS(parse_config("{\"algorithms\": [\"lasso\"]}", base));
  CHECK_THROWS(parse_config("{not json", base));
}

TEST_CASE("manifest echoes the config and a rerun from it reproduces the CSVs") {
  ExperimentConfig cfg = small_nmse();
  cfg.algorithms = {"omp", "ifsblt"};
  const fs::path dir = scratch("manifest");
  const RunResult first = run_experiment(cfg);
  write_outputs(first, dir);
  REQUIRE(fs::exists(dir / "manifest.json"));

  const std::string manifest = slurp(dir / "manifest.json");
  const ExperimentConfig echoed = parse_config(manifest, ExperimentConfig{});
  CHECK(echoed == cfg);

  const fs::path again = scratch("manifest_rerun");
  write_outputs(run_experiment(echoed), again);
  for (const char* name : {"nmse_sweep.csv", "nmse_sweep_trials.csv"}) {
    REQUIRE(fs::exists(dir / name));
    CHECK(slurp(dir / name) == slurp(again / name));
  }
  CHECK(manifest.find("\"trial_seeds\"") != std::string::npos);
  CHECK(manifest.find("\"guards\"") != std::string::npos);
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_CASE("unwritable output directory is an I/O error") {
  const RunResult r = run_nmse_sweep([] {
    ExperimentConfig c = small_nmse();
    c.trials = 1;
    c.algorithms = {"omp"};
    return c;
  }());
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  CHECK_THROWS_AS(write_outputs(r, blocker / "sub"), std::runtime_error);
  fs::remove_all(blocker);
}

}  // TEST_SUITE
