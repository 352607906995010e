#include "irsopt/system.hpp"

#include <cmath>
#include <stdexcept>

namespace irsopt {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

PhaseConfig PhaseConfig::canonical(Eigen::VectorXd raw) {
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    double t = std::fmod(raw(i), kTwoPi);
    if (t < 0.0) t += kTwoPi;
    if (t >= kTwoPi) t = 0.0;  // fmod can round up to 2*pi
    raw(i) = t;
  }
  return PhaseConfig{std::move(raw)};
}

Eigen::VectorXcd PhaseConfig::phasors() const {
  Eigen::VectorXcd phi(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    phi(i) = std::polar(1.0, theta(i));
  return phi;
}

SystemParams SystemParams::from_dbm(double p_max_dbm, double noise_dbm) {
  return SystemParams{dbm_to_watt(p_max_dbm), dbm_to_watt(noise_dbm)};
}

double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double lin_to_db(double x) { return 10.0 * std::log10(x); }

Eigen::VectorXcd effective_channel(const ChannelSet& ch,
                                   const PhaseConfig& phases) {
  if (phases.theta.size() != ch.h_br.rows() ||
      ch.h_ru.size() != ch.h_br.rows() || ch.h_bu.size() != ch.h_br.cols())
    throw std::invalid_argument("effective_channel: dimension mismatch");
  // h^H = h_bu^H + h_ru^H Diag(phi) H_br  =>
  // h = h_bu + H_br^H Diag(conj(phi)) h_ru.
  const Eigen::VectorXcd phi_conj = phases.phasors().conjugate();
  return ch.h_bu + ch.h_br.adjoint() * phi_conj.cwiseProduct(ch.h_ru);
}

Beamformer mrt(const Eigen::VectorXcd& h, double p_max) {
  const double norm = h.norm();
  if (norm <= 0.0) throw std::domain_error("mrt: degenerate zero channel");
  return Beamformer{std::sqrt(p_max) / norm * h, p_max};
}

double snr(const Eigen::VectorXcd& h, const Beamformer& f, double sigma2_n) {
  if (sigma2_n <= 0.0) throw std::domain_error("snr: noise power must be > 0");
  return std::norm(h.dot(f.f)) / sigma2_n;
}

double snr_db(const Eigen::VectorXcd& h, const Beamformer& f,
              double sigma2_n) {
  return lin_to_db(snr(h, f, sigma2_n));
}

double p1_objective(const ChannelSet& ch, const PhaseConfig& phases) {
  return effective_channel(ch, phases).squaredNorm();
}

Eigen::MatrixXcd coupling_matrix(const ChannelSet& ch) {
  return ch.h_ru.conjugate().asDiagonal() * ch.h_br;
}

}  // namespace irsopt
