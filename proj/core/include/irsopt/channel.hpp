#pragma once

#include <Eigen/Dense>

#include "irsopt/rng.hpp"

namespace irsopt {

// Link-budget geometry. Distances are treated as independent link
// parameters, not as a consistent 2-D layout (the default triple does not
// satisfy the triangle inequality).
struct LinkGeometry {
  double d_bu = 48.0;   // BS -> user distance [m]
  double d_br = 51.0;   // BS -> IRS distance [m]
  double d_ru = 1.5;    // IRS -> user distance [m]
  double alpha_bu = 2.0;
  double alpha_br = 2.0;
  double alpha_ru = 2.8;
  double d0 = 1.0;      // reference distance [m]
  double g0_db = -30.0; // path gain at d0 [dB]
  // LOS steering angles [rad]; all-zero means broadside.
  double bs_aod = 0.0;
  double irs_aoa_az = 0.0;
  double irs_aoa_el = 0.0;
  double irs_aod_az = 0.0;
  double irs_aod_el = 0.0;
};

struct FadingParams {
  int n_bs = 10;  // BS antennas N
  int m_x = 10;   // IRS grid rows
  int m_y = 5;    // IRS grid columns
  double k1 = 10.0;  // Ricean factor, BS->IRS
  double k2 = 10.0;  // Ricean factor, IRS->user

  int m() const { return m_x * m_y; }
};

// One realization of the three channels. The deterministic LOS parts and
// the diffuse per-entry scales are kept so that perturbation can re-noise
// only the fading component of Ricean links.
struct ChannelSet {
  Eigen::VectorXcd h_bu;  // N      (BS -> user, Rayleigh)
  Eigen::MatrixXcd h_br;  // M x N  (BS -> IRS, Ricean)
  Eigen::VectorXcd h_ru;  // M      (IRS -> user, Ricean)

  // Scaled deterministic LOS components (zero when absent).
  Eigen::MatrixXcd br_los;
  Eigen::VectorXcd ru_los;
  // Per-entry std-dev of the diffuse parts.
  double bu_scale = 0.0;
  double br_scale = 0.0;
  double ru_scale = 0.0;
};

// Linear power gain 10^((g0_db - 10*alpha*log10(d/d0)) / 10).
// Throws std::domain_error for non-positive distances.
double path_gain(double d, double alpha, double g0_db, double d0);

// Half-wavelength ULA response, entry k = exp(j*pi*k*sin(aod)).
Eigen::VectorXcd steering_bs(int n, double aod);

// Half-wavelength UPA response with Kronecker structure; the element at
// grid position (p, q) (flattened as p*m_y + q) has phase
// pi*(p*sin(az)*cos(el) + q*sin(el)).
Eigen::VectorXcd steering_irs(int m_x, int m_y, double az, double el);

// Draw one quasi-static realization: Rayleigh direct link, Ricean IRS
// links with rank-1 LOS built from the steering responses.
ChannelSet sample_channels(RngStream& rng, const FadingParams& fading,
                           const LinkGeometry& geom);

// Gauss-Markov perturbation: x <- sqrt(eps)*x + sqrt(1-eps)*sigma*w with
// w ~ CN(0,1), applied to the diffuse part of every link; LOS parts stay
// deterministic. eps=1 is the identity, eps=0 a fresh draw.
ChannelSet perturb_channels(const ChannelSet& ch, double eps, RngStream& rng);

// User moves delta_d away from the BS: h_bu is rescaled by the amplitude
// ratio of path gains; IRS links are untouched.
ChannelSet rescale_mobility(const ChannelSet& ch, const LinkGeometry& geom,
                            double delta_d);

// Wrap bare channel matrices (no LOS metadata) for tests and solvers.
ChannelSet make_channels(Eigen::VectorXcd h_bu, Eigen::MatrixXcd h_br,
                         Eigen::VectorXcd h_ru);

}  // namespace irsopt
