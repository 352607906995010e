#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "irsopt/channel.hpp"
#include "irsopt/system.hpp"

namespace irsopt {

struct SolverConfig {
  int max_iters = 30;
  double rho_admm = 0.0;  // <= 0 selects 4*||C||_F^2 / M
  double damping = 0.7;   // VAMP damping in (0, 1]
  double tol = 0.0;       // relative objective-change stop; 0 disables
};

struct SolverTrace {
  std::vector<double> objective_per_iter;  // initial iterate first
  double wall_time_s = 0.0;
  PhaseConfig final_phases;  // best-objective iterate
  bool fallback = false;     // VAMP fell back to coordinate ascent
};

// Exact P1 solution for a single IRS element. Throws unless M == 1.
PhaseConfig closed_form_m1(const ChannelSet& ch);

// Exhaustive search over the uniform grid {2*pi*k/levels}^M; ties resolve
// to the lexicographically smallest index vector. Refuses M > 3.
PhaseConfig grid_oracle(const ChannelSet& ch, int levels);

// Element-wise fixed point: each phase is set to its conditionally optimal
// value given the others, so the objective never decreases.
// `on_update`, when set, receives the objective after every single-element
// update (test hook).
SolverTrace coordinate_ascent(const ChannelSet& ch, const SolverConfig& cfg,
                              const std::function<void(double)>& on_update = {});

// Splitting u = z with |z_m| = 1: proximal-linearized ascent on u, unit
// circle projection on z, dual update. Best iterate is returned.
SolverTrace admm_solve(const ChannelSet& ch, const SolverConfig& cfg);

// Damped two-stage iteration: LMMSE estimate of u against an aligned
// channel target, then unit-modulus denoising with a scalar Onsager
// correction. Falls back to coordinate ascent if the precision turns
// non-positive.
SolverTrace vamp_solve(const ChannelSet& ch, const SolverConfig& cfg);

// i.i.d. uniform phases on [0, 2*pi).
PhaseConfig random_phases(RngStream& rng, int m);

// Phases corresponding to a unit-modulus u = conj(phasors): theta = -arg(u).
PhaseConfig phases_from_u(const Eigen::VectorXcd& u);

// Triangle-inequality bound (||h_bu|| + sum_m ||C_m||)^2 on the objective.
double objective_upper_bound(const ChannelSet& ch);

}  // namespace irsopt
