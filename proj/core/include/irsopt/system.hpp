#pragma once

#include <Eigen/Dense>

#include "irsopt/channel.hpp"

namespace irsopt {

// IRS phase shifts, canonicalized to [0, 2*pi).
struct PhaseConfig {
  Eigen::VectorXd theta;

  static PhaseConfig canonical(Eigen::VectorXd raw);
  // Element-wise e^{j*theta}.
  Eigen::VectorXcd phasors() const;
  int size() const { return static_cast<int>(theta.size()); }
};

struct Beamformer {
  Eigen::VectorXcd f;
  double p_max = 0.0;
};

struct SystemParams {
  double p_max = 0.0;     // linear watts
  double sigma2_n = 0.0;  // linear watts

  static SystemParams from_dbm(double p_max_dbm, double noise_dbm);
};

double dbm_to_watt(double dbm);
double lin_to_db(double x);

// h with h^H = h_bu^H + h_ru^H Diag(e^{j theta}) H_br.
Eigen::VectorXcd effective_channel(const ChannelSet& ch,
                                   const PhaseConfig& phases);

// f = sqrt(p_max) h / ||h||. Throws on a zero channel.
Beamformer mrt(const Eigen::VectorXcd& h, double p_max);

// rho = |h^H f|^2 / sigma2_n.
double snr(const Eigen::VectorXcd& h, const Beamformer& f, double sigma2_n);
double snr_db(const Eigen::VectorXcd& h, const Beamformer& f, double sigma2_n);

// ||effective_channel||^2, the P1 objective under MRT.
double p1_objective(const ChannelSet& ch, const PhaseConfig& phases);

// C = Diag(conj(h_ru)) H_br, so that h = h_bu + C^H u with u = conj(phasors).
Eigen::MatrixXcd coupling_matrix(const ChannelSet& ch);

}  // namespace irsopt
