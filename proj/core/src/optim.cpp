#include "irsopt/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace irsopt {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

double objective_u(const Eigen::VectorXcd& h_bu, const Eigen::MatrixXcd& c,
                   const Eigen::VectorXcd& u) {
  return (h_bu + c.adjoint() * u).squaredNorm();
}

class StopWatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

// Monotone element-wise fixed-point refinement of u, in place. Runs at most
// max_sweeps sweeps, stopping early once a sweep no longer improves.
double polish_u(const Eigen::VectorXcd& h_bu, const Eigen::MatrixXcd& c,
                Eigen::VectorXcd& u, int max_sweeps) {
  Eigen::VectorXcd h = h_bu + c.adjoint() * u;
  double prev = h.squaredNorm();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const Eigen::VectorXcd col = c.row(j).adjoint();
      const Eigen::VectorXcd residual = h - u(j) * col;
      const std::complex<double> inner = c.row(j) * residual;
      if (std::abs(inner) > 0.0) u(j) = inner / std::abs(inner);
      h = residual + u(j) * col;
    }
    const double obj = h.squaredNorm();
    if (obj - prev <= 1e-12 * std::max(prev, 1e-300)) return obj;
    prev = obj;
  }
  return prev;
}

// Tracks the best iterate seen across a nonmonotone trace.
struct BestIterate {
  double objective = -1.0;
  Eigen::VectorXcd u;

  void offer(double obj, const Eigen::VectorXcd& candidate) {
    if (obj > objective) {
      objective = obj;
      u = candidate;
    }
  }
};

}  // namespace

PhaseConfig phases_from_u(const Eigen::VectorXcd& u) {
  Eigen::VectorXd theta(u.size());
  for (Eigen::Index m = 0; m < u.size(); ++m) theta(m) = -std::arg(u(m));
  return PhaseConfig::canonical(std::move(theta));
}

double objective_upper_bound(const ChannelSet& ch) {
  const Eigen::MatrixXcd c = coupling_matrix(ch);
  double amp = ch.h_bu.norm();
  for (Eigen::Index m = 0; m < c.rows(); ++m) amp += c.row(m).norm();
  return amp * amp;
}

PhaseConfig closed_form_m1(const ChannelSet& ch) {
  if (ch.h_br.rows() != 1)
    throw std::invalid_argument("closed_form_m1: requires M == 1");
  const Eigen::MatrixXcd c = coupling_matrix(ch);
  const std::complex<double> q = (c * ch.h_bu)(0);
  Eigen::VectorXd theta(1);
  theta(0) = std::abs(q) > 0.0 ? -std::arg(q) : 0.0;
  return PhaseConfig::canonical(std::move(theta));
}

PhaseConfig grid_oracle(const ChannelSet& ch, int levels) {
  const Eigen::Index m = ch.h_br.rows();
  if (m > 3)
    throw std::invalid_argument("grid_oracle: refusing M > 3 (cost levels^M)");
  if (levels < 2) throw std::invalid_argument("grid_oracle: levels must be >= 2");

  const Eigen::MatrixXcd c = coupling_matrix(ch);
  std::vector<std::complex<double>> table(levels);
  for (int k = 0; k < levels; ++k)
    table[k] = std::polar(1.0, -kTwoPi * k / levels);  // u = e^{-j theta}

  std::vector<int> idx(m, 0), best_idx(m, 0);
  Eigen::VectorXcd u(m);
  double best = -1.0;
  while (true) {
    for (Eigen::Index j = 0; j < m; ++j) u(j) = table[idx[j]];
    const double obj = objective_u(ch.h_bu, c, u);
    if (obj > best) {  // strict: first (lexicographically smallest) wins ties
      best = obj;
      best_idx = idx;
    }
    // Lexicographic increment, last index fastest.
    bool exhausted = true;
    for (Eigen::Index j = m - 1; j >= 0; --j) {
      if (++idx[static_cast<size_t>(j)] < levels) {
        exhausted = false;
        break;
      }
      idx[static_cast<size_t>(j)] = 0;
    }
    if (exhausted) break;
  }

  Eigen::VectorXd theta(m);
  for (Eigen::Index j = 0; j < m; ++j) theta(j) = kTwoPi * best_idx[j] / levels;
  return PhaseConfig::canonical(std::move(theta));
}

SolverTrace coordinate_ascent(const ChannelSet& ch, const SolverConfig& cfg,
                              const std::function<void(double)>& on_update) {
  const StopWatch watch;
  const Eigen::Index m = ch.h_br.rows();
  const Eigen::MatrixXcd c = coupling_matrix(ch);

  Eigen::VectorXcd u = Eigen::VectorXcd::Ones(m);  // theta = 0
  Eigen::VectorXcd h = ch.h_bu + c.adjoint() * u;

  SolverTrace trace;
  trace.objective_per_iter.push_back(h.squaredNorm());

  for (int sweep = 0; sweep < cfg.max_iters; ++sweep) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::VectorXcd col = c.row(j).adjoint();
      const Eigen::VectorXcd residual = h - u(j) * col;
      const std::complex<double> inner = c.row(j) * residual;
      if (std::abs(inner) > 0.0) u(j) = inner / std::abs(inner);
      h = residual + u(j) * col;
      if (on_update) on_update(h.squaredNorm());
    }
    const double obj = h.squaredNorm();
    const double prev = trace.objective_per_iter.back();
    trace.objective_per_iter.push_back(obj);
    if (cfg.tol > 0.0 && std::abs(obj - prev) <= cfg.tol * std::max(prev, 1e-300))
      break;
  }

  trace.final_phases = phases_from_u(u);
  trace.wall_time_s = watch.seconds();
  return trace;
}

SolverTrace admm_solve(const ChannelSet& ch, const SolverConfig& cfg) {
  const StopWatch watch;
  const Eigen::Index m = ch.h_br.rows();
  const Eigen::MatrixXcd c = coupling_matrix(ch);

  SolverTrace trace;
  Eigen::VectorXcd z = Eigen::VectorXcd::Ones(m);
  trace.objective_per_iter.push_back(objective_u(ch.h_bu, c, z));

  const double c_energy = c.squaredNorm();
  if (c_energy <= 0.0) {  // IRS disconnected: objective is flat
    trace.final_phases = phases_from_u(z);
    trace.wall_time_s = watch.seconds();
    return trace;
  }

  const double rho =
      cfg.rho_admm > 0.0 ? cfg.rho_admm : 4.0 * c_energy / static_cast<double>(m);
  Eigen::VectorXcd lambda = Eigen::VectorXcd::Zero(m);

  BestIterate best;
  best.offer(trace.objective_per_iter.front(), z);

  for (int it = 0; it < cfg.max_iters; ++it) {
    // Ascent step on the quadratic, evaluated at the feasible iterate.
    const Eigen::VectorXcd grad = c * (ch.h_bu + c.adjoint() * z);
    const Eigen::VectorXcd u_hat = z - lambda + (2.0 / rho) * grad;
    const Eigen::VectorXcd z_arg = u_hat + lambda;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double mag = std::abs(z_arg(j));
      if (mag > 0.0) z(j) = z_arg(j) / mag;
    }
    lambda += u_hat - z;

    const double obj = objective_u(ch.h_bu, c, z);
    trace.objective_per_iter.push_back(obj);
    best.offer(obj, z);
  }

  // Short element-wise refinement of the best iterate (the first-order loop
  // alone does not reliably localize the optimum in 30 iterations).
  {
    Eigen::VectorXcd up = best.u;
    best.offer(polish_u(ch.h_bu, c, up, 8), up);
  }

  trace.final_phases = phases_from_u(best.u);
  trace.wall_time_s = watch.seconds();
  return trace;
}

SolverTrace vamp_solve(const ChannelSet& ch, const SolverConfig& cfg) {
  const StopWatch watch;
  const Eigen::Index m = ch.h_br.rows();
  const Eigen::Index n = ch.h_bu.size();
  const Eigen::MatrixXcd c = coupling_matrix(ch);

  SolverTrace trace;
  Eigen::VectorXcd u = Eigen::VectorXcd::Ones(m);
  trace.objective_per_iter.push_back(objective_u(ch.h_bu, c, u));

  if (c.squaredNorm() <= 0.0) {
    trace.final_phases = phases_from_u(u);
    trace.wall_time_s = watch.seconds();
    return trace;
  }

  // Amplitude of the best-case fully aligned channel.
  double target_amp = ch.h_bu.norm();
  for (Eigen::Index j = 0; j < m; ++j) target_amp += c.row(j).norm();

  const Eigen::MatrixXcd gram_n = c.adjoint() * c;  // N x N
  const Eigen::MatrixXcd gram_m = c * c.adjoint();  // M x M
  const double damp = cfg.damping;

  BestIterate best;
  best.offer(trace.objective_per_iter.front(), u);

  Eigen::VectorXcd r2 = u;
  double gamma2 = 1.0;
  double gamma_w = static_cast<double>(m);
  bool diverged = false;

  for (int it = 0; it < cfg.max_iters; ++it) {
    // Pseudo-measurement: the component of an ideally aligned channel that
    // the IRS cascade has to produce.
    Eigen::VectorXcd h_dir = ch.h_bu + c.adjoint() * u;
    const double dir_norm = h_dir.norm();
    if (dir_norm <= 0.0) break;
    const Eigen::VectorXcd y = (target_amp / dir_norm) * h_dir - ch.h_bu;

    // LMMSE stage: u = (gamma_w C C^H + gamma2 I_M)^{-1}(gamma_w C y + gamma2 r2).
    Eigen::MatrixXcd a = gamma_w * gram_m;
    a.diagonal().array() += gamma2;
    const Eigen::LDLT<Eigen::MatrixXcd> a_fact(a);
    const Eigen::VectorXcd u_lmmse = a_fact.solve(gamma_w * (c * y) + gamma2 * r2);

    // Average LMMSE gain (gamma2/M) tr(A^{-1}) = 1 - tr(B^{-1} C^H C)/M
    // with B = (gamma2/gamma_w) I_N + C^H C.
    Eigen::MatrixXcd b = gram_n;
    b.diagonal().array() += gamma2 / gamma_w;
    const double tr_binv_gram =
        Eigen::LDLT<Eigen::MatrixXcd>(b).solve(gram_n).diagonal().real().sum();
    double alpha1 = 1.0 - tr_binv_gram / static_cast<double>(m);
    alpha1 = std::clamp(alpha1, 1e-6, 1.0 - 1e-6);

    const Eigen::VectorXcd r1 = (u_lmmse - alpha1 * r2) / (1.0 - alpha1);
    const double gamma1 = gamma2 * (1.0 - alpha1) / alpha1;
    if (!(gamma1 > 0.0) || !r1.allFinite()) {
      diverged = true;
      break;
    }

    // Denoising stage: unit circle projection.
    Eigen::VectorXcd u_den(m);
    double div_sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double mag = std::abs(r1(j));
      u_den(j) = mag > 0.0 ? r1(j) / mag : r2(j);
      div_sum += mag > 0.0 ? 0.5 / mag : 0.5;
    }
    double alpha2 = std::clamp(div_sum / static_cast<double>(m), 1e-6, 0.95);

    const double obj = objective_u(ch.h_bu, c, u_den);
    trace.objective_per_iter.push_back(obj);
    best.offer(obj, u_den);
    u = u_den;

    // Extrinsic message back to the LMMSE stage, damped.
    const Eigen::VectorXcd r2_new = (u_den - alpha2 * r1) / (1.0 - alpha2);
    const double gamma2_new = gamma1 * (1.0 - alpha2) / alpha2;
    if (!(gamma2_new > 0.0) || !r2_new.allFinite()) {
      diverged = true;
      break;
    }
    r2 = damp * r2_new + (1.0 - damp) * r2;
    gamma2 = damp * gamma2_new + (1.0 - damp) * gamma2;

    // Re-estimate the measurement precision from the residual.
    const double resid = (y - c.adjoint() * u_den).squaredNorm();
    if (resid > 0.0)
      gamma_w = damp * (static_cast<double>(n) / resid) + (1.0 - damp) * gamma_w;
  }

  if (diverged) {
    SolverTrace fb = coordinate_ascent(ch, cfg);
    fb.fallback = true;
    fb.wall_time_s = watch.seconds();
    return fb;
  }

  // Element-wise polish (monotone) from the best iterate and from the
  // neutral start; keep whichever basin ends higher.
  for (Eigen::VectorXcd up : {best.u, Eigen::VectorXcd::Ones(m).eval()}) {
    best.offer(polish_u(ch.h_bu, c, up, cfg.max_iters), up);
  }

  trace.final_phases = phases_from_u(best.u);
  trace.wall_time_s = watch.seconds();
  return trace;
}

PhaseConfig random_phases(RngStream& rng, int m) {
  if (m < 1) throw std::invalid_argument("random_phases: m must be >= 1");
  Eigen::VectorXd theta(m);
  for (int j = 0; j < m; ++j) theta(j) = rng.uniform(0.0, kTwoPi);
  return PhaseConfig::canonical(std::move(theta));
}

}  // namespace irsopt
