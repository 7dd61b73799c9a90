#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddsbl/config.hpp"
#include "ddsbl/sbl.hpp"

namespace ddsbl {

/// One line of the summary table:
/// experiment,algorithm,axis,axis_value,stat,value,n_trials
struct CsvRow {
  std::string experiment;
  std::string algorithm;
  std::string axis;  // snr_db | measurements | iteration | none
  double axis_value = 0.0;
  std::string stat;
  double value = 0.0;
  int n_trials = 0;
};

/// Outcome of one algorithm on one trial of one sweep cell. `value` is the
/// NMSE in dB, or the BER for the BER sweep.
struct TrialRecord {
  std::string algorithm;
  double axis_value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double value = 0.0;
  double nmse_db = 0.0;
  long bit_errors = 0;
  long bits = 0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string error;
  GuardCounters guards;
  long shape_checks = 0;      // iterations whose shape increments were inspected
  long shape_violations = 0;  // of those, a~ - a != 1/2 or c~ - c != R/2
  std::vector<TraceEntry> trace;  // convergence experiment only
};

struct CellTiming {
  std::string algorithm;
  double axis_value = 0.0;
  double seconds = 0.0;
};

struct RunResult {
  ExperimentConfig config;
  std::vector<CsvRow> rows;
  std::vector<TrialRecord> trials;  // sorted by (axis, algorithm, trial)
  std::vector<CellTiming> timings;  // wall-clock; not part of the CSV outputs
  GuardCounters guards;
  long shape_checks = 0;
  long shape_violations = 0;
  int failed_trials = 0;
  int failed_cells = 0;  // cells where every trial failed
};

/// Worker threads for trial-level parallelism: DDSBL_WORKERS if set, else the
/// hardware concurrency.
int worker_count();

RunResult run_nmse_sweep(const ExperimentConfig& cfg);
RunResult run_ber_sweep(const ExperimentConfig& cfg);
RunResult run_convergence(const ExperimentConfig& cfg);
RunResult run_success_rate(const ExperimentConfig& cfg);
RunResult run_experiment(const ExperimentConfig& cfg);

void write_summary_csv(const RunResult& result, std::ostream& os);
// experiment,algorithm,axis_value,trial,seed,value,nmse_db,iterations,converged,failed
void write_trials_csv(const RunResult& result, std::ostream& os);
// experiment,algorithm,trial,iter,rel_change,nmse_db
void write_traces_csv(const RunResult& result, std::ostream& os);

/// Writes manifest.json (config echo, per-trial seeds, version, per-cell
/// wall-clock, guard counts, output file list) into `dir`.
void emit_manifest(const ExperimentConfig& cfg, const RunResult& result,
                   const std::filesystem::path& dir);

/// Writes <experiment>.csv, <experiment>_trials.csv, the trace file for the
/// convergence experiment, and the manifest. Throws std::runtime_error if
/// `dir` cannot be created or written.
void write_outputs(const RunResult& result, const std::filesystem::path& dir);

std::string_view software_version();

}  // namespace ddsbl
