#include "ddsbl/sbl.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ddsbl/errors.hpp"
#include "ddsbl/metrics.hpp"
#include "ddsbl/rng.hpp"

namespace ddsbl {
namespace {

constexpr double kBTildeFloor = 1e-300;
constexpr double kRhoLimit = 700.0;

double relative_change(const Eigen::VectorXcd& now, const Eigen::VectorXcd& before) {
  const double denom = before.squaredNorm();
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return (now - before).squaredNorm() / denom;
}

void check_finite(const SblState& s, const char* solver) {
  if (!s.mu.allFinite() || !std::isfinite(s.gamma_mean) || !s.alpha_mean.allFinite()) {
    std::ostringstream os;
    os << solver << ": non-finite state at iteration " << s.iter;
    throw DivergenceError(os.str());
  }
}

void check_measurement(const Measurement& m) {
  if (m.phi.rows() == 0 || m.phi.cols() == 0) throw DimensionError("empty measurement matrix");
  if (m.y.size() != m.phi.rows()) throw DimensionError("y length does not match Phi rows");
}

TraceEntry trace_entry(const SblState& s, double rel, const SolveOptions& opts, int flagged) {
  TraceEntry e;
  e.iter = s.iter;
  e.rel_change = rel;
  e.nmse_db = opts.truth ? nmse_db(*opts.truth, s.z) : std::numeric_limits<double>::quiet_NaN();
  e.flagged = flagged;
  return e;
}

RecoveryResult inverse_free_loop(const Measurement& m, const SblHyper& hyper,
                                 const SolveOptions& opts, bool with_threshold) {
  hyper.validate();
  check_measurement(m);
  SblState s = initial_state(m, hyper, lipschitz_v(m.phi));

  RecoveryResult out;
  while (s.iter < hyper.max_iter) {
    ++s.iter;
    const Linearization at_z = linearize(m, s.z);
    update_hyperparameters(s, at_z, hyper);
    int flagged = 0;
    if (with_threshold) {
      s = threshold_update(std::move(s));
      flagged = inflate_flagged(s, hyper.varsigma);
    }
    update_posterior(s, at_z);
    check_finite(s, with_threshold ? "ifsblt" : "ifsbl");

    Eigen::VectorXcd previous = std::move(s.z);
    s.z = s.mu;
    const double rel = relative_change(s.z, previous);
    TraceEntry entry = trace_entry(s, rel, opts, flagged);
    entry.residual_norm = std::sqrt(at_z.residual_norm2);
    out.trace.push_back(entry);
    if (opts.on_iteration) opts.on_iteration(s);
    if (rel < hyper.epsilon) {
      out.converged = true;
      break;
    }
  }
  out.h_hat = s.z;
  out.iterations = s.iter;
  out.guards = s.guards;
  if (with_threshold) {
    for (Eigen::Index n = 0; n < s.rho.size(); ++n) {
      if (s.rho(n) >= 0.0) out.support.push_back(static_cast<int>(n));
    }
  }
  return out;
}

}  // namespace

void SblHyper::validate() const {
  if (!(a > 0 && b > 0 && c > 0 && d > 0)) throw std::invalid_argument("a, b, c, d must be positive");
  if (!(varsigma > 1.0)) throw std::invalid_argument("varsigma must exceed 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (init_alpha && !(*init_alpha > 0.0)) throw std::invalid_argument("init_alpha must be positive");
}

double lipschitz_v(const Eigen::MatrixXcd& phi) {
  if (phi.size() == 0) throw DimensionError("lipschitz_v: empty matrix");
  Rng rng(0x5eed5eedULL);
  Eigen::VectorXcd v(phi.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = complex_normal(rng, 1.0);
  v.normalize();

  double lambda = 0.0;
  const long cap = 10 * static_cast<long>(phi.cols());
  for (long it = 0; it < cap; ++it) {
    Eigen::VectorXcd w = phi.adjoint() * (phi * v);
    const double next = v.dot(w).real();
    const double norm = w.norm();
    if (norm == 0.0) throw std::invalid_argument("lipschitz_v: Phi^H Phi annihilates the iterate");
    v = w / norm;
    const bool done = it > 0 && std::abs(next - lambda) <= 1e-10 * std::abs(next);
    lambda = next;
    if (done) break;
  }
  return 2.0 * lambda;
}

double relaxed_bound(const Measurement& m, const Eigen::VectorXcd& h, const Eigen::VectorXcd& z,
                     double V) {
  const Eigen::VectorXcd r = m.y - m.phi * z;
  const Eigen::VectorXcd d = h - z;
  // ||y - Phi z||^2 + 2 Re{(h - z)^H Phi^H (Phi z - y)} + V/2 ||h - z||^2
  return r.squaredNorm() - 2.0 * d.dot(m.phi.adjoint() * r).real() + 0.5 * V * d.squaredNorm();
}

Linearization linearize(const Measurement& m, const Eigen::VectorXcd& z) {
  const Eigen::VectorXcd r = m.y - m.phi * z;
  return Linearization{m.phi.adjoint() * r, r.squaredNorm()};
}

SblState initial_state(const Measurement& m, const SblHyper& hyper, double V) {
  if (!(V > 0.0)) throw std::invalid_argument("Lipschitz constant must be positive");
  const Eigen::Index R = m.phi.cols();
  SblState s;
  s.V = V;
  s.mu = Eigen::VectorXcd::Zero(R);
  s.z = Eigen::VectorXcd::Zero(R);
  s.alpha_moment = Eigen::VectorXd::Constant(R, hyper.initial_alpha());
  s.alpha_mean = s.alpha_moment;
  s.gamma_mean = hyper.initial_gamma();
  s.sigma_diag = (s.alpha_mean.array() + 0.5 * V * s.gamma_mean).inverse().matrix();
  s.rho = Eigen::VectorXd::Zero(R);
  s.a_tilde = {hyper.a, 0.0};
  s.c_tilde = {hyper.c, 0.0};
  s.b_tilde = Eigen::VectorXd::Constant(R, hyper.b);
  s.d_tilde = hyper.d;
  return s;
}

void update_posterior(SblState& s, const Linearization& at_z) {
  const double half_v = 0.5 * s.V;
  s.sigma_diag = (s.alpha_mean.array() + half_v * s.gamma_mean).inverse().matrix();
  // -(Phi^H Phi z - Phi^H y - V/2 z) = grad + V/2 z
  s.mu = (s.gamma_mean * s.sigma_diag.array()).cast<cd>() * (at_z.grad + half_v * s.z).array();
}

void update_hyperparameters(SblState& s, const Linearization& at_z, const SblHyper& hyper) {
  const Eigen::Index R = s.mu.size();
  const Eigen::VectorXcd diff = s.mu - s.z;
  // <g(h, z)>: ||y - Phi z||^2 + 2 Re{(mu - z)^H Phi^H (Phi z - y)} + V/2 (||mu - z||^2 + tr Sigma)
  s.g_mean = at_z.residual_norm2 - 2.0 * diff.dot(at_z.grad).real() +
             0.5 * s.V * (diff.squaredNorm() + s.sigma_diag.sum());

  s.a_tilde = {hyper.a, 0.5};
  s.c_tilde = {hyper.c, 0.5 * static_cast<double>(R)};
  s.b_tilde.resize(R);
  for (Eigen::Index n = 0; n < R; ++n) {
    double bt = hyper.b + 0.5 * (std::norm(s.mu(n)) + s.sigma_diag(n));
    if (bt < kBTildeFloor) {
      bt = kBTildeFloor;
      ++s.guards.b_floor;
    }
    s.b_tilde(n) = bt;
  }
  s.d_tilde = hyper.d + 0.5 * s.g_mean;

  s.alpha_moment = s.a_tilde.value() / s.b_tilde.array();
  s.alpha_mean = s.alpha_moment;
  s.gamma_mean = s.c_tilde.value() / s.d_tilde;
}

SblState ifsbl_e_step(SblState s, const Measurement& m, const SblHyper& hyper) {
  const Linearization at_z = linearize(m, s.z);
  update_posterior(s, at_z);
  update_hyperparameters(s, at_z, hyper);
  return s;
}

SblState threshold_update(SblState s) {
  for (Eigen::Index n = 0; n < s.rho.size(); ++n) {
    const double alpha = s.alpha_mean(n);
    const double increment = 0.5 * std::log(alpha / s.gamma_mean) -
                             0.5 * std::norm(s.mu(n)) * (alpha - s.gamma_mean);
    double rho = s.rho(n) + increment;
    if (rho > kRhoLimit || rho < -kRhoLimit) {
      rho = std::clamp(rho, -kRhoLimit, kRhoLimit);
      ++s.guards.rho_clamp;
    }
    s.rho(n) = rho;
  }
  return s;
}

int inflate_flagged(SblState& s, double varsigma) {
  int flagged = 0;
  for (Eigen::Index n = 0; n < s.rho.size(); ++n) {
    if (s.rho(n) < 0.0) {
      s.alpha_mean(n) *= varsigma;
      ++flagged;
    }
  }
  return flagged;
}

Posterior sbl_posterior(const Measurement& m, const Eigen::MatrixXcd& gram,
                        const Eigen::VectorXd& alpha, double gamma) {
  const Eigen::Index R = gram.rows();
  // Sigma = D (I + gamma D G D)^-1 D with D = Lambda^-1/2; the bracket has
  // eigenvalues >= 1, so the factorization is well conditioned.
  const Eigen::VectorXd dscale = alpha.cwiseInverse().cwiseSqrt();
  Eigen::MatrixXcd scaled = gamma * (dscale.asDiagonal() * gram * dscale.asDiagonal());
  scaled.diagonal().array() += 1.0;

  Posterior p;
  Eigen::LLT<Eigen::MatrixXcd> llt(scaled);
  double jitter = 1e-12 * scaled.diagonal().real().sum() / static_cast<double>(R);
  while (llt.info() != Eigen::Success) {
    ++p.jitter;
    if (p.jitter > 20) throw DivergenceError("sbl: precision matrix not positive definite");
    scaled.diagonal().array() += jitter;
    jitter *= 10.0;
    llt.compute(scaled);
  }
  const Eigen::MatrixXcd inner = llt.solve(Eigen::MatrixXcd::Identity(R, R));
  p.sigma = dscale.asDiagonal() * inner * dscale.asDiagonal();
  p.mu = gamma * (p.sigma * (m.phi.adjoint() * m.y));
  return p;
}

namespace {

// What one SBL iteration needs from the posterior: mu, diag(Sigma) and
// tr(Phi^H Phi Sigma), without forming Sigma.
struct SblMoments {
  Eigen::VectorXcd mu;
  Eigen::VectorXd sigma_diag;
  double trace_gs = 0.0;
  long jitter = 0;
};

template <typename Matrix>
Eigen::LLT<Eigen::MatrixXcd> factor_with_jitter(Matrix&& a, long& count) {
  Eigen::LLT<Eigen::MatrixXcd> llt(a);
  double jitter = 1e-12 * a.diagonal().real().sum() / static_cast<double>(a.rows());
  while (llt.info() != Eigen::Success) {
    ++count;
    if (count > 20) throw DivergenceError("sbl: precision matrix not positive definite");
    a.diagonal().array() += jitter;
    jitter *= 10.0;
    llt.compute(a);
  }
  return llt;
}

// R <= Q: factor the R x R matrix I + gamma D G D.
SblMoments moments_coefficient_space(const Measurement& m, const Eigen::MatrixXcd& gram,
                                     const Eigen::VectorXcd& phi_h_y,
                                     const Eigen::VectorXd& alpha, double gamma) {
  const Eigen::Index R = gram.rows();
  const Eigen::VectorXd dscale = alpha.cwiseInverse().cwiseSqrt();
  Eigen::MatrixXcd scaled = gamma * (dscale.asDiagonal() * gram * dscale.asDiagonal());
  scaled.diagonal().array() += 1.0;

  SblMoments out;
  const auto llt = factor_with_jitter(scaled, out.jitter);
  Eigen::MatrixXcd linv = Eigen::MatrixXcd::Identity(R, R);
  llt.matrixL().solveInPlace(linv);
  const Eigen::VectorXd inner_diag = linv.colwise().squaredNorm().transpose();
  out.sigma_diag = dscale.array().square() * inner_diag.array();
  // gamma D G D = scaled - I, so gamma tr(G Sigma) = sum_n (1 - [scaled^-1]_nn).
  out.trace_gs = (1.0 - inner_diag.array()).sum() / gamma;
  out.mu = gamma * dscale.cast<cd>().asDiagonal() *
           llt.solve((dscale.cast<cd>().asDiagonal() * phi_h_y).eval());
  (void)m;
  return out;
}

// Q < R: factor the Q x Q matrix K = I + gamma A A^H with A = Phi D and use
// (I + gamma A^H A)^-1 = I - gamma A^H K^-1 A.
SblMoments moments_measurement_space(const Measurement& m, const Eigen::VectorXd& alpha,
                                     double gamma) {
  const Eigen::Index Q = m.Q();
  const Eigen::VectorXd dscale = alpha.cwiseInverse().cwiseSqrt();
  const Eigen::MatrixXcd A = m.phi * dscale.cast<cd>().asDiagonal();
  Eigen::MatrixXcd K = Eigen::MatrixXcd::Identity(Q, Q);
  K.selfadjointView<Eigen::Lower>().rankUpdate(A, gamma);
  K.triangularView<Eigen::StrictlyUpper>() = K.adjoint();

  SblMoments out;
  const auto llt = factor_with_jitter(K, out.jitter);
  Eigen::MatrixXcd W = A;
  llt.matrixL().solveInPlace(W);
  const Eigen::VectorXd w2 = W.colwise().squaredNorm().transpose();
  out.sigma_diag =
      dscale.array().square() * (1.0 - gamma * w2.array()).max(std::numeric_limits<double>::min());
  out.trace_gs = w2.sum();
  out.mu = gamma * dscale.cast<cd>().asDiagonal() * (A.adjoint() * llt.solve(m.y));
  return out;
}

}  // namespace

RecoveryResult sbl_estimate(const Measurement& m, const SblHyper& hyper, const SolveOptions& opts) {
  hyper.validate();
  check_measurement(m);
  const Eigen::Index R = m.phi.cols();
  const bool dual = m.Q() < R;
  const Eigen::MatrixXcd gram = dual ? Eigen::MatrixXcd() : Eigen::MatrixXcd(m.phi.adjoint() * m.phi);
  const Eigen::VectorXcd phi_h_y = m.phi.adjoint() * m.y;

  SblState s;
  s.V = lipschitz_v(m.phi);
  s.z = Eigen::VectorXcd::Zero(R);
  s.alpha_moment = Eigen::VectorXd::Constant(R, hyper.initial_alpha());
  s.alpha_mean = s.alpha_moment;
  s.gamma_mean = hyper.initial_gamma();
  s.rho = Eigen::VectorXd::Zero(R);
  s.b_tilde = Eigen::VectorXd::Constant(R, hyper.b);
  s.a_tilde = {hyper.a, 0.0};
  s.c_tilde = {hyper.c, 0.0};
  s.d_tilde = hyper.d;

  RecoveryResult out;
  while (s.iter < hyper.max_iter) {
    ++s.iter;
    SblMoments mom = dual ? moments_measurement_space(m, s.alpha_mean, s.gamma_mean)
                          : moments_coefficient_space(m, gram, phi_h_y, s.alpha_mean, s.gamma_mean);
    s.guards.jitter += mom.jitter;
    s.mu = std::move(mom.mu);
    s.sigma_diag = std::move(mom.sigma_diag);
    check_finite(s, "sbl");

    // <||y - Phi h||^2> = ||y - Phi mu||^2 + tr(Phi^H Phi Sigma)
    const Eigen::VectorXcd r = m.y - m.phi * s.mu;
    s.g_mean = r.squaredNorm() + mom.trace_gs;

    s.a_tilde = {hyper.a, 0.5};
    s.c_tilde = {hyper.c, 0.5 * static_cast<double>(R)};
    for (Eigen::Index n = 0; n < R; ++n) {
      double bt = hyper.b + 0.5 * (std::norm(s.mu(n)) + s.sigma_diag(n));
      if (bt < kBTildeFloor) {
        bt = kBTildeFloor;
        ++s.guards.b_floor;
      }
      s.b_tilde(n) = bt;
    }
    s.d_tilde = hyper.d + 0.5 * s.g_mean;
    s.alpha_moment = s.a_tilde.value() / s.b_tilde.array();
    s.alpha_mean = s.alpha_moment;
    s.gamma_mean = s.c_tilde.value() / s.d_tilde;

    Eigen::VectorXcd previous = std::move(s.z);
    s.z = s.mu;
    const double rel = relative_change(s.z, previous);
    TraceEntry entry = trace_entry(s, rel, opts, 0);
    entry.residual_norm = r.norm();
    out.trace.push_back(entry);
    if (opts.on_iteration) opts.on_iteration(s);
    if (rel < hyper.epsilon) {
      out.converged = true;
      break;
    }
  }
  out.h_hat = s.z;
  out.iterations = s.iter;
  out.guards = s.guards;
  return out;
}

RecoveryResult ifsbl_estimate(const Measurement& m, const SblHyper& hyper,
                              const SolveOptions& opts) {
  return inverse_free_loop(m, hyper, opts, false);
}

RecoveryResult ifsblt_estimate(const Measurement& m, const SblHyper& hyper,
                               const SolveOptions& opts) {
  return inverse_free_loop(m, hyper, opts, true);
}

}  // namespace ddsbl
