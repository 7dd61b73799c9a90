#include "ddsbl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "ddsbl/detector.hpp"
#include "ddsbl/measurement.hpp"
#include "ddsbl/metrics.hpp"
#include "ddsbl/omp.hpp"
#include "ddsbl/rng.hpp"
#include "json.hpp"

#ifndef DDSBL_VERSION
#define DDSBL_VERSION "0.0.0"
#endif

namespace ddsbl {
namespace {

// Sub-stream salts: the channel, noise and data of a trial are shared by
// every SNR point and algorithm (common random numbers).
constexpr std::uint64_t kChannelStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kDataStream = 3;
constexpr std::uint64_t kProblemStream = 4;

using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Runs task(i) for i in [0, n) on the worker pool. Tasks must not throw.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

OmpStop omp_stop(const ExperimentConfig& cfg, const Measurement& m, double noise_var) {
  if (cfg.omp.sparsity) return OmpStop::atoms(*cfg.omp.sparsity);
  const double tol = cfg.omp.residual_factor * std::sqrt(static_cast<double>(m.Q()) * noise_var);
  // Noiseless problems stop once the residual is at rounding level.
  return OmpStop::residual(std::max(tol, 1e-12 * m.y.norm()));
}

RecoveryResult estimate(const std::string& algo, const ExperimentConfig& cfg, const Measurement& m,
                        double noise_var, const SolveOptions& opts) {
  if (algo == "omp") return omp_estimate(m, omp_stop(cfg, m, noise_var), opts);
  if (algo == "sbl") return sbl_estimate(m, cfg.hyper, opts);
  if (algo == "ifsbl") return ifsbl_estimate(m, cfg.hyper, opts);
  if (algo == "ifsblt") return ifsblt_estimate(m, cfg.hyper, opts);
  throw std::invalid_argument("unknown algorithm: " + algo);
}

// Counts, per iteration, whether the stored shape increments are exactly 1/2 and R/2.
SolveOptions checked(TrialRecord& rec, const Measurement& m,
                     const Eigen::VectorXcd* truth = nullptr) {
  SolveOptions opts;
  opts.truth = truth;
  const double half_r = 0.5 * static_cast<double>(m.R());
  opts.on_iteration = [&rec, half_r](const SblState& s) {
    ++rec.shape_checks;
    if (s.a_tilde.increment != 0.5 || s.c_tilde.increment != half_r) ++rec.shape_violations;
  };
  return opts;
}

// Fills the solver-derived fields of a record; failures are recorded, not thrown.
template <typename Fn>
void guarded(TrialRecord& rec, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.value = std::numeric_limits<double>::quiet_NaN();
  }
}

struct Timer {
  Clock::time_point start = Clock::now();
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start).count(); }
};

// Shared frame of one OTFS trial.
struct OtfsTrial {
  ChannelSpec channel;
  DDGrid tx;
  std::vector<std::uint8_t> bits;
  Eigen::VectorXcd truth;
};

OtfsTrial otfs_trial(const ExperimentConfig& cfg, std::uint64_t seed, bool with_data) {
  const PilotLayout layout = cfg.layout();
  OtfsTrial t;
  t.channel = gen_channel(cfg.system, cfg.paths, cfg.fractional, cfg.delay_profile,
                          stream_seed(seed, kChannelStream));
  const Constellation qam = Constellation::qam4();
  const auto cells = data_cells(cfg.system, layout);
  std::vector<cd> symbols;
  if (with_data) {
    Rng rng(stream_seed(seed, kDataStream));
    std::bernoulli_distribution coin(0.5);
    t.bits.resize(cells.size() * qam.bits_per_symbol());
    for (auto& b : t.bits) b = coin(rng) ? 1 : 0;
    symbols = qam.map(t.bits);
    t.tx = make_pilot_frame(cfg.system, layout, std::span<const cd>(symbols));
  } else {
    t.tx = make_pilot_frame(cfg.system, layout);
  }
  t.truth = effective_taps(t.channel, layout, cfg.system);
  return t;
}

// Index of (axis, algorithm, trial) in the flat record array.
struct Grid {
  std::size_t axes, algos, trials;
  std::size_t at(std::size_t a, std::size_t g, std::size_t t) const {
    return (a * algos + g) * trials + t;
  }
};

void finish(RunResult& r, const std::vector<std::string>& series, const std::vector<double>& axis,
            int trials, const std::vector<double>& cell_seconds) {
  for (const auto& rec : r.trials) {
    r.guards += rec.guards;
    r.shape_checks += rec.shape_checks;
    r.shape_violations += rec.shape_violations;
    if (rec.failed) ++r.failed_trials;
  }
  const Grid g{axis.size(), series.size(), static_cast<std::size_t>(trials)};
  for (std::size_t a = 0; a < axis.size(); ++a) {
    for (std::size_t s = 0; s < series.size(); ++s) {
      bool all_failed = true;
      for (int t = 0; t < trials; ++t) all_failed &= r.trials[g.at(a, s, t)].failed;
      if (all_failed) ++r.failed_cells;
      r.timings.push_back({series[s], axis[a], cell_seconds[a * series.size() + s]});
    }
  }
}

std::vector<double> successful(const std::vector<TrialRecord>& recs, std::size_t begin,
                               std::size_t count, double TrialRecord::*field) {
  std::vector<double> out;
  for (std::size_t i = begin; i < begin + count; ++i) {
    if (!recs[i].failed) out.push_back(recs[i].*field);
  }
  return out;
}

std::vector<double> iteration_counts(const std::vector<TrialRecord>& recs, std::size_t begin,
                                     std::size_t count) {
  std::vector<double> out;
  for (std::size_t i = begin; i < begin + count; ++i) {
    if (!recs[i].failed) out.push_back(recs[i].iterations);
  }
  return out;
}

void add_row(RunResult& r, const std::string& algo, const std::string& axis, double x,
             const std::string& stat, double value, std::size_t n) {
  r.rows.push_back({std::string(to_string(r.config.kind)), algo, axis, x, stat, value,
                    static_cast<int>(n)});
}

// NMSE in dB of the linear-domain average error ratio.
double linear_mean_db(const std::vector<double>& db) {
  if (db.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double v : db) s += std::pow(10.0, v / 10.0);
  return std::max(10.0 * std::log10(s / static_cast<double>(db.size())), kNmseFloorDb);
}

}  // namespace

std::string_view software_version() { return DDSBL_VERSION; }

int worker_count() {
  if (const char* env = std::getenv("DDSBL_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

RunResult run_nmse_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const PilotLayout layout = cfg.layout();
  const auto& algos = cfg.algorithms;
  const Grid g{cfg.snr_db.size(), algos.size(), static_cast<std::size_t>(cfg.trials)};

  RunResult r;
  r.config = cfg;
  r.trials.resize(g.axes * g.algos * g.trials);
  std::vector<double> seconds(g.axes * g.algos, 0.0);
  std::mutex time_mutex;

  parallel_for(g.trials, [&](std::size_t t) {
    const std::uint64_t seed = trial_seed(cfg.seed, t);
    std::optional<OtfsTrial> frame;
    std::string setup_error;
    try {
      frame = otfs_trial(cfg, seed, true);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t a = 0; a < g.axes; ++a) {
      const double nv = noise_variance(cfg.snr_db[a]);
      std::optional<Measurement> m;
      if (frame) {
        try {
          const DDGrid rx = synthesize_rx(frame->tx, frame->channel, nv, cfg.system,
                                          stream_seed(seed, kNoiseStream));
          m = build_measurement(rx, frame->tx, layout, cfg.system);
        } catch (const std::exception& e) {
          setup_error = e.what();
        }
      }
      for (std::size_t s = 0; s < g.algos; ++s) {
        TrialRecord& rec = r.trials[g.at(a, s, t)];
        rec.algorithm = algos[s];
        rec.axis_value = cfg.snr_db[a];
        rec.trial = static_cast<int>(t);
        rec.seed = seed;
        if (!m) {
          rec.failed = true;
          rec.error = setup_error;
          continue;
        }
        const Timer timer;
        guarded(rec, [&] {
          const RecoveryResult res = estimate(algos[s], cfg, *m, nv, checked(rec, *m));
          rec.nmse_db = rec.value = nmse_db(frame->truth, res.h_hat);
          rec.iterations = res.iterations;
          rec.converged = res.converged;
          rec.guards = res.guards;
        });
        std::lock_guard lock(time_mutex);
        seconds[a * g.algos + s] += timer.seconds();
      }
    }
  });

  finish(r, algos, cfg.snr_db, cfg.trials, seconds);
  for (std::size_t a = 0; a < g.axes; ++a) {
    for (std::size_t s = 0; s < g.algos; ++s) {
      const std::size_t begin = g.at(a, s, 0);
      const auto db = successful(r.trials, begin, g.trials, &TrialRecord::value);
      const auto its = iteration_counts(r.trials, begin, g.trials);
      const double x = cfg.snr_db[a];
      add_row(r, algos[s], "snr_db", x, "nmse_db_mean", linear_mean_db(db), db.size());
      add_row(r, algos[s], "snr_db", x, "nmse_db_avg_of_db", mean(db), db.size());
      add_row(r, algos[s], "snr_db", x, "nmse_db_median", median(db), db.size());
      add_row(r, algos[s], "snr_db", x, "nmse_db_std", stddev(db), db.size());
      add_row(r, algos[s], "snr_db", x, "iterations_mean", mean(its), its.size());
    }
  }
  return r;
}

RunResult run_ber_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  const PilotLayout layout = cfg.layout();
  std::vector<std::string> series = cfg.algorithms;
  series.push_back("perfect_csi");
  const Grid g{cfg.snr_db.size(), series.size(), static_cast<std::size_t>(cfg.trials)};
  const Constellation qam = Constellation::qam4();
  const MpOptions mp{cfg.detector.max_iter, cfg.detector.damping};

  RunResult r;
  r.config = cfg;
  r.trials.resize(g.axes * g.algos * g.trials);
  std::vector<double> seconds(g.axes * g.algos, 0.0);
  std::mutex time_mutex;

  parallel_for(g.trials, [&](std::size_t t) {
    const std::uint64_t seed = trial_seed(cfg.seed, t);
    std::optional<OtfsTrial> frame;
    std::string setup_error;
    try {
      frame = otfs_trial(cfg, seed, true);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t a = 0; a < g.axes; ++a) {
      const double nv = noise_variance(cfg.snr_db[a]);
      std::optional<DDGrid> rx;
      std::optional<Measurement> m;
      if (frame) {
        try {
          rx = synthesize_rx(frame->tx, frame->channel, nv, cfg.system,
                             stream_seed(seed, kNoiseStream));
          m = build_measurement(*rx, frame->tx, layout, cfg.system);
        } catch (const std::exception& e) {
          setup_error = e.what();
        }
      }
      for (std::size_t s = 0; s < g.algos; ++s) {
        TrialRecord& rec = r.trials[g.at(a, s, t)];
        rec.algorithm = series[s];
        rec.axis_value = cfg.snr_db[a];
        rec.trial = static_cast<int>(t);
        rec.seed = seed;
        if (!m) {
          rec.failed = true;
          rec.error = setup_error;
          continue;
        }
        const Timer timer;
        guarded(rec, [&] {
          EffectiveChannel chan;
          if (series[s] == "perfect_csi") {
            chan = EffectiveChannel::from_channel(frame->channel, cfg.system);
            rec.nmse_db = kNmseFloorDb;
            rec.converged = true;
          } else {
            const RecoveryResult res = estimate(series[s], cfg, *m, nv, checked(rec, *m));
            rec.nmse_db = nmse_db(frame->truth, res.h_hat);
            rec.iterations = res.iterations;
            rec.converged = res.converged;
            rec.guards = res.guards;
            chan = EffectiveChannel::from_estimate(res.h_hat, layout, cfg.system,
                                                   cfg.detector.prune);
          }
          const DetectionReport det =
              cfg.detector.kind == "lmmse"
                  ? detect_lmmse(*rx, layout, chan, nv, qam, frame->bits)
                  : detect_mp(*rx, layout, chan, qam, nv, frame->bits, mp);
          rec.value = det.ber;
          rec.bits = static_cast<long>(frame->bits.size());
          rec.bit_errors = std::lround(det.ber * static_cast<double>(rec.bits));
        });
        std::lock_guard lock(time_mutex);
        seconds[a * g.algos + s] += timer.seconds();
      }
    }
  });

  finish(r, series, cfg.snr_db, cfg.trials, seconds);
  for (std::size_t a = 0; a < g.axes; ++a) {
    for (std::size_t s = 0; s < g.algos; ++s) {
      const std::size_t begin = g.at(a, s, 0);
      long errors = 0, bits = 0;
      std::size_t n = 0;
      for (std::size_t i = begin; i < begin + g.trials; ++i) {
        if (r.trials[i].failed) continue;
        errors += r.trials[i].bit_errors;
        bits += r.trials[i].bits;
        ++n;
      }
      const auto db = successful(r.trials, begin, g.trials, &TrialRecord::nmse_db);
      const double x = cfg.snr_db[a];
      add_row(r, series[s], "snr_db", x, "ber",
              bits ? static_cast<double>(errors) / static_cast<double>(bits)
                   : std::numeric_limits<double>::quiet_NaN(),
              n);
      add_row(r, series[s], "snr_db", x, "bit_errors", static_cast<double>(errors), n);
      add_row(r, series[s], "snr_db", x, "nmse_db_mean", linear_mean_db(db), db.size());
    }
  }
  return r;
}

RunResult run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& algos = cfg.algorithms;
  const GenericCsConfig& gc = cfg.generic;
  const double snr = gc.snr_db.value_or(std::numeric_limits<double>::infinity());
  const Grid g{1, algos.size(), static_cast<std::size_t>(cfg.trials)};

  RunResult r;
  r.config = cfg;
  r.trials.resize(g.algos * g.trials);
  std::vector<double> seconds(g.algos, 0.0);
  std::mutex time_mutex;

  parallel_for(g.trials, [&](std::size_t t) {
    const std::uint64_t seed = trial_seed(cfg.seed, t);
    std::optional<GaussianProblem> p;
    std::string setup_error;
    try {
      p = gaussian_problem(gc.measurements, gc.length, gc.sparsity, snr,
                           stream_seed(seed, kProblemStream));
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t s = 0; s < g.algos; ++s) {
      TrialRecord& rec = r.trials[g.at(0, s, t)];
      rec.algorithm = algos[s];
      rec.axis_value = gc.measurements;
      rec.trial = static_cast<int>(t);
      rec.seed = seed;
      if (!p) {
        rec.failed = true;
        rec.error = setup_error;
        continue;
      }
      const Timer timer;
      guarded(rec, [&] {
        RecoveryResult res = estimate(algos[s], cfg, p->measurement, p->noise_var,
                                      checked(rec, p->measurement, &p->truth));
        rec.nmse_db = rec.value = nmse_db(p->truth, res.h_hat);
        rec.iterations = res.iterations;
        rec.converged = res.converged;
        rec.guards = res.guards;
        rec.trace = std::move(res.trace);
      });
      std::lock_guard lock(time_mutex);
      seconds[s] += timer.seconds();
    }
  });

  finish(r, algos, {static_cast<double>(gc.measurements)}, cfg.trials, seconds);
  for (std::size_t s = 0; s < g.algos; ++s) {
    const std::size_t begin = g.at(0, s, 0);
    const auto db = successful(r.trials, begin, g.trials, &TrialRecord::value);
    const auto its = iteration_counts(r.trials, begin, g.trials);
    double conv = 0.0;
    std::size_t longest = 0;
    for (std::size_t i = begin; i < begin + g.trials; ++i) {
      if (r.trials[i].failed) continue;
      conv += r.trials[i].converged;
      longest = std::max(longest, r.trials[i].trace.size());
    }
    add_row(r, algos[s], "none", 0, "iterations_median", median(its), its.size());
    add_row(r, algos[s], "none", 0, "iterations_mean", mean(its), its.size());
    add_row(r, algos[s], "none", 0, "converged_fraction", its.empty() ? 0.0 : conv / its.size(),
            its.size());
    add_row(r, algos[s], "none", 0, "nmse_db_median", median(db), db.size());
    add_row(r, algos[s], "none", 0, "nmse_db_mean", linear_mean_db(db), db.size());
    // Per-iteration curves; a finished trace holds its last value.
    for (std::size_t it = 0; it < longest; ++it) {
      std::vector<double> nm;
      for (std::size_t i = begin; i < begin + g.trials; ++i) {
        const auto& tr = r.trials[i].trace;
        if (r.trials[i].failed || tr.empty()) continue;
        nm.push_back(tr[std::min(it, tr.size() - 1)].nmse_db);
      }
      add_row(r, algos[s], "iteration", static_cast<double>(it + 1), "nmse_db_median", median(nm),
              nm.size());
      add_row(r, algos[s], "iteration", static_cast<double>(it + 1), "nmse_db_mean",
              linear_mean_db(nm), nm.size());
    }
  }
  return r;
}

RunResult run_success_rate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& algos = cfg.algorithms;
  const GenericCsConfig& gc = cfg.generic;
  const double snr = gc.snr_db.value_or(std::numeric_limits<double>::infinity());
  std::vector<double> axis(gc.measurement_grid.begin(), gc.measurement_grid.end());
  const Grid g{axis.size(), algos.size(), static_cast<std::size_t>(cfg.trials)};

  RunResult r;
  r.config = cfg;
  r.trials.resize(g.axes * g.algos * g.trials);
  std::vector<double> seconds(g.axes * g.algos, 0.0);
  std::mutex time_mutex;

  // One task per (measurement count, trial) keeps the pool busy on the large counts.
  parallel_for(g.axes * g.trials, [&](std::size_t task) {
    const std::size_t a = task / g.trials;
    const std::size_t t = task % g.trials;
    const std::uint64_t seed = trial_seed(cfg.seed, t);
    std::optional<GaussianProblem> p;
    std::string setup_error;
    try {
      p = gaussian_problem(gc.measurement_grid[a], gc.length, gc.sparsity, snr,
                           stream_seed(seed, kProblemStream));
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t s = 0; s < g.algos; ++s) {
      TrialRecord& rec = r.trials[g.at(a, s, t)];
      rec.algorithm = algos[s];
      rec.axis_value = axis[a];
      rec.trial = static_cast<int>(t);
      rec.seed = seed;
      if (!p) {
        rec.failed = true;
        rec.error = setup_error;
        continue;
      }
      const Timer timer;
      guarded(rec, [&] {
        const RecoveryResult res =
            estimate(algos[s], cfg, p->measurement, p->noise_var, checked(rec, p->measurement));
        rec.nmse_db = nmse_db(p->truth, res.h_hat);
        rec.value = rec.nmse_db <= cfg.success_nmse_db ? 1.0 : 0.0;
        rec.iterations = res.iterations;
        rec.converged = res.converged;
        rec.guards = res.guards;
      });
      std::lock_guard lock(time_mutex);
      seconds[a * g.algos + s] += timer.seconds();
    }
  });

  finish(r, algos, axis, cfg.trials, seconds);
  for (std::size_t a = 0; a < g.axes; ++a) {
    for (std::size_t s = 0; s < g.algos; ++s) {
      const std::size_t begin = g.at(a, s, 0);
      const auto ok = successful(r.trials, begin, g.trials, &TrialRecord::value);
      const auto db = successful(r.trials, begin, g.trials, &TrialRecord::nmse_db);
      add_row(r, algos[s], "measurements", axis[a], "success_rate", mean(ok), ok.size());
      add_row(r, algos[s], "measurements", axis[a], "nmse_db_median", median(db), db.size());
    }
  }
  return r;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  switch (cfg.kind) {
    case ExperimentKind::NmseSweep: return run_nmse_sweep(cfg);
    case ExperimentKind::BerSweep: return run_ber_sweep(cfg);
    case ExperimentKind::Convergence: return run_convergence(cfg);
    case ExperimentKind::SuccessRate: return run_success_rate(cfg);
  }
  throw std::invalid_argument("unknown experiment kind");
}

void write_summary_csv(const RunResult& result, std::ostream& os) {
  os << "experiment,algorithm,axis,axis_value,stat,value,n_trials\n";
  for (const auto& row : result.rows) {
    os << row.experiment << ',' << row.algorithm << ',' << row.axis << ',' << fmt(row.axis_value)
       << ',' << row.stat << ',' << fmt(row.value) << ',' << row.n_trials << '\n';
  }
}

void write_trials_csv(const RunResult& result, std::ostream& os) {
  os << "experiment,algorithm,axis_value,trial,seed,value,nmse_db,iterations,converged,failed\n";
  const std::string exp(to_string(result.config.kind));
  for (const auto& t : result.trials) {
    os << exp << ',' << t.algorithm << ',' << fmt(t.axis_value) << ',' << t.trial << ','
       << t.seed << ',' << fmt(t.value) << ',' << fmt(t.nmse_db) << ',' << t.iterations << ','
       << (t.converged ? 1 : 0) << ',' << (t.failed ? 1 : 0) << '\n';
  }
}

void write_traces_csv(const RunResult& result, std::ostream& os) {
  os << "experiment,algorithm,trial,iter,rel_change,nmse_db\n";
  const std::string exp(to_string(result.config.kind));
  for (const auto& t : result.trials) {
    for (const auto& e : t.trace) {
      os << exp << ',' << t.algorithm << ',' << t.trial << ',' << e.iter << ','
         << fmt(e.rel_change) << ',' << fmt(e.nmse_db) << '\n';
    }
  }
}

namespace {

std::vector<std::string> output_files(const RunResult& result) {
  const std::string exp(to_string(result.config.kind));
  std::vector<std::string> files{exp + ".csv", exp + "_trials.csv"};
  if (result.config.kind == ExperimentKind::Convergence) files.push_back(exp + "_traces.csv");
  return files;
}

}  // namespace

void emit_manifest(const ExperimentConfig& cfg, const RunResult& result,
                   const std::filesystem::path& dir) {
  using nlohmann::json;
  json m;
  m["software"] = "ddsbl";
  m["version"] = std::string(software_version());
  m["config"] = json::parse(config_to_json(cfg));
  m["base_seed"] = cfg.seed;
  std::vector<std::uint64_t> seeds;
  for (int t = 0; t < cfg.trials; ++t) seeds.push_back(trial_seed(cfg.seed, t));
  m["trial_seeds"] = seeds;
  m["workers"] = worker_count();
  json cells = json::array();
  for (const auto& c : result.timings) {
    cells.push_back({{"algorithm", c.algorithm}, {"axis_value", c.axis_value},
                     {"wall_seconds", c.seconds}});
  }
  m["cells"] = cells;
  m["guards"] = {{"b_floor", result.guards.b_floor},
                 {"rho_clamp", result.guards.rho_clamp},
                 {"jitter", result.guards.jitter},
                 {"total", result.guards.total()}};
  m["shape_identities"] = {{"checked_iterations", result.shape_checks},
                           {"violations", result.shape_violations}};
  m["failed_trials"] = result.failed_trials;
  m["failed_cells"] = result.failed_cells;
  json errors = json::array();
  for (const auto& t : result.trials) {
    if (t.failed) {
      errors.push_back({{"algorithm", t.algorithm}, {"axis_value", t.axis_value},
                        {"trial", t.trial}, {"error", t.error}});
    }
  }
  m["errors"] = errors;
  m["outputs"] = output_files(result);

  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << m.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing manifest in " + dir.string());
}

void write_outputs(const RunResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());
  const auto files = output_files(result);
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open(files[0]);
    write_summary_csv(result, out);
  }
  {
    auto out = open(files[1]);
    write_trials_csv(result, out);
  }
  if (files.size() > 2) {
    auto out = open(files[2]);
    write_traces_csv(result, out);
  }
  emit_manifest(result.config, result, dir);
}

}  // namespace ddsbl
