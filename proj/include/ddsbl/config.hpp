#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddsbl/dd_channel.hpp"
#include "ddsbl/sbl.hpp"

namespace ddsbl {

enum class ExperimentKind { NmseSweep, BerSweep, Convergence, SuccessRate };
enum class Scale { Desk, Paper };

ExperimentKind parse_experiment(std::string_view name);
std::string_view to_string(ExperimentKind kind);
Scale parse_scale(std::string_view name);
std::string_view to_string(Scale scale);

/// Dense-Phi problem used by the convergence and success-rate experiments.
struct GenericCsConfig {
  int length = 240;
  int measurements = 180;
  int sparsity = 12;
  std::optional<double> snr_db = 10.0;  // unset: noiseless
  std::vector<int> measurement_grid;     // success-rate sweep

  friend bool operator==(const GenericCsConfig&, const GenericCsConfig&) = default;
};

struct OmpConfig {
  std::optional<int> sparsity;  // unset: stop on the noise-level residual
  double residual_factor = 1.0;  // tol = factor * sqrt(Q * noise_var)

  friend bool operator==(const OmpConfig&, const OmpConfig&) = default;
};

struct DetectorConfig {
  std::string kind = "mp";  // mp | lmmse
  int max_iter = 30;
  double damping = 0.6;
  double prune = 1e-6;

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::NmseSweep;
  Scale scale = Scale::Desk;
  SystemParams system = SystemParams::desk();
  int pilot_rows = 1;
  int pilot_cols = 1;
  cd pilot_amplitude{1.0, 0.0};
  int paths = 4;
  bool fractional = true;
  DelayProfile delay_profile = DelayProfile::Exponential;
  SblHyper hyper;
  OmpConfig omp;
  DetectorConfig detector;
  GenericCsConfig generic;
  std::vector<std::string> algorithms{"omp", "sbl", "ifsbl", "ifsblt"};
  std::vector<double> snr_db{3, 6, 9, 12, 15};
  int trials = 200;
  std::uint64_t seed = 1;
  double success_nmse_db = -20.0;
  std::string output_dir = "out";

  PilotLayout layout() const {
    return PilotLayout::centered(system, pilot_rows, pilot_cols, pilot_amplitude);
  }
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Defaults for an experiment at the given scale. Desk: M = N = 32, P = 4,
/// l_max = 8, k_max = 6, eta = 3. Paper: M = N = 128, P = 9, l_max = 20,
/// k_max = 16, eta = 5.
ExperimentConfig default_config(ExperimentKind kind, Scale scale);

/// Overlays the keys present in `json_text` on `base`. A run manifest is also
/// accepted: its "config" member is used.
ExperimentConfig parse_config(std::string_view json_text, const ExperimentConfig& base);
ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base);

/// Every field, as JSON text that parse_config reads back unchanged.
std::string config_to_json(const ExperimentConfig& cfg, int indent = 2);

}  // namespace ddsbl
