#include "ddsbl/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ddsbl {
namespace {

using nlohmann::json;

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = j.at(key).get<T>();
  }
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

// SNR values: numbers, or "inf" for a noiseless point (JSON has no infinity).
double read_snr(const json& j) {
  if (j.is_string() && j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

json snr_json(double v) { return std::isinf(v) && v > 0 ? json("inf") : json(v); }

cd read_complex(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("complex value must be [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

ExperimentKind parse_experiment(std::string_view name) {
  if (name == "nmse_sweep" || name == "nmse") return ExperimentKind::NmseSweep;
  if (name == "ber_sweep" || name == "ber") return ExperimentKind::BerSweep;
  if (name == "convergence" || name == "converge") return ExperimentKind::Convergence;
  if (name == "success_rate" || name == "success") return ExperimentKind::SuccessRate;
  throw std::invalid_argument("unknown experiment: " + std::string(name));
}

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::NmseSweep: return "nmse_sweep";
    case ExperimentKind::BerSweep: return "ber_sweep";
    case ExperimentKind::Convergence: return "convergence";
    case ExperimentKind::SuccessRate: return "success_rate";
  }
  return "?";
}

Scale parse_scale(std::string_view name) {
  if (name == "desk") return Scale::Desk;
  if (name == "paper") return Scale::Paper;
  throw std::invalid_argument("scale must be desk or paper");
}

std::string_view to_string(Scale scale) { return scale == Scale::Desk ? "desk" : "paper"; }

void ExperimentConfig::validate() const {
  system.validate();
  layout().validate(system);
  hyper.validate();
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (algorithms.empty()) throw std::invalid_argument("no algorithms selected");
  for (const auto& a : algorithms) {
    if (a != "omp" && a != "sbl" && a != "ifsbl" && a != "ifsblt") {
      throw std::invalid_argument("unknown algorithm: " + a);
    }
  }
  if ((kind == ExperimentKind::NmseSweep || kind == ExperimentKind::BerSweep) && snr_db.empty()) {
    throw std::invalid_argument("SNR grid is empty");
  }
  if (kind == ExperimentKind::SuccessRate && generic.measurement_grid.empty()) {
    throw std::invalid_argument("measurement grid is empty");
  }
  if (detector.kind != "mp" && detector.kind != "lmmse") {
    throw std::invalid_argument("detector must be mp or lmmse");
  }
  if (paths < 1) throw std::invalid_argument("paths must be >= 1");
}

ExperimentConfig default_config(ExperimentKind kind, Scale scale) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.scale = scale;
  if (scale == Scale::Paper) {
    cfg.system = SystemParams::paper();
    cfg.paths = 9;
  }
  switch (kind) {
    case ExperimentKind::NmseSweep:
      break;
    case ExperimentKind::BerSweep:
      cfg.algorithms = {"omp", "sbl", "ifsbl", "ifsblt"};
      break;
    case ExperimentKind::Convergence:
      cfg.algorithms = {"sbl", "ifsbl", "ifsblt"};
      cfg.trials = 100;
      break;
    case ExperimentKind::SuccessRate:
      cfg.trials = 100;
      cfg.generic.snr_db.reset();
      cfg.generic.measurement_grid = {20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120};
      break;
  }
  return cfg;
}

ExperimentConfig parse_config(std::string_view json_text, const ExperimentConfig& base) {
  json root = json::parse(json_text);
  if (root.contains("config") && root.at("config").is_object()) root = root.at("config");

  ExperimentConfig cfg = base;
  if (root.contains("experiment")) cfg.kind = parse_experiment(root.at("experiment").get<std::string>());
  if (root.contains("scale")) cfg.scale = parse_scale(root.at("scale").get<std::string>());
  if (root.contains("system")) {
    const json& s = root.at("system");
    read(s, "M", cfg.system.M);
    read(s, "N", cfg.system.N);
    read(s, "delta_f", cfg.system.delta_f);
    read(s, "fc", cfg.system.fc);
    read(s, "eta", cfg.system.eta);
    read(s, "l_max", cfg.system.l_max);
    read(s, "k_max", cfg.system.k_max);
  }
  if (root.contains("pilot")) {
    const json& p = root.at("pilot");
    read(p, "rows", cfg.pilot_rows);
    read(p, "cols", cfg.pilot_cols);
    if (p.contains("amplitude")) cfg.pilot_amplitude = read_complex(p.at("amplitude"));
  }
  if (root.contains("channel")) {
    const json& c = root.at("channel");
    read(c, "paths", cfg.paths);
    read(c, "fractional", cfg.fractional);
    if (c.contains("delay_profile")) {
      cfg.delay_profile = parse_delay_profile(c.at("delay_profile").get<std::string>());
    }
  }
  if (root.contains("hyper")) {
    const json& h = root.at("hyper");
    read(h, "a", cfg.hyper.a);
    read(h, "b", cfg.hyper.b);
    read(h, "c", cfg.hyper.c);
    read(h, "d", cfg.hyper.d);
    read(h, "varsigma", cfg.hyper.varsigma);
    read(h, "epsilon", cfg.hyper.epsilon);
    read(h, "max_iter", cfg.hyper.max_iter);
    read(h, "init_alpha", cfg.hyper.init_alpha);
  }
  if (root.contains("omp")) {
    read(root.at("omp"), "sparsity", cfg.omp.sparsity);
    read(root.at("omp"), "residual_factor", cfg.omp.residual_factor);
  }
  if (root.contains("detector")) {
    const json& d = root.at("detector");
    read(d, "kind", cfg.detector.kind);
    read(d, "max_iter", cfg.detector.max_iter);
    read(d, "damping", cfg.detector.damping);
    read(d, "prune", cfg.detector.prune);
  }
  if (root.contains("generic")) {
    const json& g = root.at("generic");
    read(g, "length", cfg.generic.length);
    read(g, "measurements", cfg.generic.measurements);
    read(g, "sparsity", cfg.generic.sparsity);
    read(g, "snr_db", cfg.generic.snr_db);
    read(g, "measurement_grid", cfg.generic.measurement_grid);
  }
  read(root, "algorithms", cfg.algorithms);
  if (root.contains("snr_db")) {
    cfg.snr_db.clear();
    for (const auto& v : root.at("snr_db")) cfg.snr_db.push_back(read_snr(v));
  }
  read(root, "trials", cfg.trials);
  read(root, "seed", cfg.seed);
  read(root, "success_nmse_db", cfg.success_nmse_db);
  read(root, "output_dir", cfg.output_dir);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path, const ExperimentConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), base);
}

std::string config_to_json(const ExperimentConfig& cfg, int indent) {
  json j;
  j["experiment"] = to_string(cfg.kind);
  j["scale"] = to_string(cfg.scale);
  j["system"] = {{"M", cfg.system.M},         {"N", cfg.system.N},
                 {"delta_f", cfg.system.delta_f}, {"fc", cfg.system.fc},
                 {"eta", cfg.system.eta},     {"l_max", cfg.system.l_max},
                 {"k_max", cfg.system.k_max}};
  j["pilot"] = {{"rows", cfg.pilot_rows},
                {"cols", cfg.pilot_cols},
                {"amplitude", {cfg.pilot_amplitude.real(), cfg.pilot_amplitude.imag()}}};
  j["channel"] = {{"paths", cfg.paths},
                  {"fractional", cfg.fractional},
                  {"delay_profile", to_string(cfg.delay_profile)}};
  j["hyper"] = {{"a", cfg.hyper.a},
                {"b", cfg.hyper.b},
                {"c", cfg.hyper.c},
                {"d", cfg.hyper.d},
                {"varsigma", cfg.hyper.varsigma},
                {"epsilon", cfg.hyper.epsilon},
                {"max_iter", cfg.hyper.max_iter},
                {"init_alpha", optional_json(cfg.hyper.init_alpha)}};
  j["omp"] = {{"sparsity", optional_json(cfg.omp.sparsity)},
              {"residual_factor", cfg.omp.residual_factor}};
  j["detector"] = {{"kind", cfg.detector.kind},
                   {"max_iter", cfg.detector.max_iter},
                   {"damping", cfg.detector.damping},
                   {"prune", cfg.detector.prune}};
  j["generic"] = {{"length", cfg.generic.length},
                  {"measurements", cfg.generic.measurements},
                  {"sparsity", cfg.generic.sparsity},
                  {"snr_db", optional_json(cfg.generic.snr_db)},
                  {"measurement_grid", cfg.generic.measurement_grid}};
  j["algorithms"] = cfg.algorithms;
  j["snr_db"] = json::array();
  for (double v : cfg.snr_db) j["snr_db"].push_back(snr_json(v));
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["success_nmse_db"] = cfg.success_nmse_db;
  j["output_dir"] = cfg.output_dir;
  return j.dump(indent);
}

}  // namespace ddsbl
