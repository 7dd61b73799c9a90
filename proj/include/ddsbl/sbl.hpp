#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "ddsbl/measurement.hpp"

namespace ddsbl {

/// Gamma hyper-prior parameters and loop controls shared by SBL, IFSBL and
/// IFSBL-T. Defaults follow the IFSBL-T initialization.
struct SblHyper {
  double a = 1e-5;
  double b = 1e-5;
  double c = 1e-5;
  double d = 1e-5;
  double varsigma = 10.0;  // precision inflation at flagged coefficients
  double epsilon = 1e-8;   // on ||z_i - z_{i-1}||^2 / ||z_{i-1}||^2
  int max_iter = 1000;
  std::optional<double> init_alpha;  // initial <alpha_n>; a / b when unset

  void validate() const;
  double initial_alpha() const { return init_alpha.value_or(a / b); }
  double initial_gamma() const { return c / d; }

  friend bool operator==(const SblHyper&, const SblHyper&) = default;
};

/// Posterior Gamma shape kept as prior + data increment so the increment is
/// exactly representable (a + 1/2 - a is not 1/2 in binary floating point).
struct GammaShape {
  double prior = 0.0;
  double increment = 0.0;
  double value() const { return prior + increment; }
};

/// Counts of numerical safety nets that fired. All zero on healthy runs.
struct GuardCounters {
  long b_floor = 0;    // b-tilde clamped at 1e-300
  long rho_clamp = 0;  // log-odds clamped to [-700, 700]
  long jitter = 0;     // diagonal loading added to a failed Cholesky

  long total() const { return b_floor + rho_clamp + jitter; }
  GuardCounters& operator+=(const GuardCounters& o) {
    b_floor += o.b_floor;
    rho_clamp += o.rho_clamp;
    jitter += o.jitter;
    return *this;
  }
};

struct SblState {
  Eigen::VectorXcd mu;
  Eigen::VectorXcd z;
  Eigen::VectorXd sigma_diag;
  Eigen::MatrixXcd sigma_full;  // classic SBL only; empty for the inverse-free solvers
  Eigen::VectorXd alpha_moment;  // a~ / b~_n as computed from the moments
  Eigen::VectorXd alpha_mean;    // precisions entering the next posterior (after inflation)
  double gamma_mean = 1.0;
  Eigen::VectorXd rho;
  double V = 0.0;
  GammaShape a_tilde;
  GammaShape c_tilde;
  Eigen::VectorXd b_tilde;
  double d_tilde = 0.0;
  double g_mean = 0.0;  // <g(h, z)> (inverse-free) or <||y - Phi h||^2> (classic)
  int iter = 0;
  GuardCounters guards;
};

struct TraceEntry {
  int iter = 0;
  double rel_change = 0.0;  // +inf while the previous estimate is zero
  double nmse_db = 0.0;     // NaN when no truth was supplied
  int flagged = 0;          // coefficients with rho < 0 (IFSBL-T)
  double residual_norm = 0.0;
};

struct RecoveryResult {
  Eigen::VectorXcd h_hat;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
  std::vector<int> support;  // IFSBL-T: indices with rho >= 0
  GuardCounters guards;
};

struct SolveOptions {
  const Eigen::VectorXcd* truth = nullptr;  // fills TraceEntry::nmse_db
  std::function<void(const SblState&)> on_iteration;
};

/// 2 * lambda_max(Phi^H Phi) by power iteration (relative Rayleigh-quotient
/// change 1e-10, at most 10 R sweeps, fixed start vector).
double lipschitz_v(const Eigen::MatrixXcd& phi);

/// Relaxed quadratic bound g(h, z) >= ||y - Phi h||^2, tight at h = z.
double relaxed_bound(const Measurement& m, const Eigen::VectorXcd& h, const Eigen::VectorXcd& z,
                     double V);

/// Phi^H (y - Phi z) and ||y - Phi z||^2 at the current estimate.
struct Linearization {
  Eigen::VectorXcd grad;
  double residual_norm2 = 0.0;
};

Linearization linearize(const Measurement& m, const Eigen::VectorXcd& z);

/// Prior state for the inverse-free solvers: z = mu = 0, <alpha_n> from the
/// hyper-prior, <gamma> = c / d, Sigma from those precisions.
SblState initial_state(const Measurement& m, const SblHyper& hyper, double V);

/// Diagonal posterior of the relaxed bound at state.z:
///   Sigma = (V<gamma>/2 I + Lambda)^-1,
///   mu    = -<gamma> Sigma (Phi^H Phi z - Phi^H y - V/2 z).
void update_posterior(SblState& s, const Linearization& at_z);

/// Gamma posteriors and moments from (mu, Sigma, z): a~, b~_n, c~ = c + R/2,
/// d~ = d + <g>/2, then <alpha_n> = a~ / b~_n and <gamma> = c~ / d~.
void update_hyperparameters(SblState& s, const Linearization& at_z, const SblHyper& hyper);

/// One inverse-free E-step at state.z: posterior, then hyperparameters.
SblState ifsbl_e_step(SblState s, const Measurement& m, const SblHyper& hyper);

/// rho_n += 1/2 ln(<alpha_n> / <gamma>) - |mu_n|^2 / 2 (<alpha_n> - <gamma>).
SblState threshold_update(SblState s);

/// <alpha_n> *= varsigma wherever rho_n < 0. Returns the number flagged.
int inflate_flagged(SblState& s, double varsigma);

/// Full-covariance posterior for fixed precisions:
///   Sigma = (gamma Phi^H Phi + Lambda)^-1,  mu = gamma Sigma Phi^H y.
struct Posterior {
  Eigen::VectorXcd mu;
  Eigen::MatrixXcd sigma;
  long jitter = 0;
};

Posterior sbl_posterior(const Measurement& m, const Eigen::MatrixXcd& gram,
                        const Eigen::VectorXd& alpha, double gamma);

RecoveryResult sbl_estimate(const Measurement& m, const SblHyper& hyper,
                            const SolveOptions& opts = {});
RecoveryResult ifsbl_estimate(const Measurement& m, const SblHyper& hyper,
                              const SolveOptions& opts = {});
RecoveryResult ifsblt_estimate(const Measurement& m, const SblHyper& hyper,
                               const SolveOptions& opts = {});

}  // namespace ddsbl
