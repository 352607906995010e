#include "irsopt/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace irsopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::VectorXcd cgaussian_vector(RngStream& rng, Eigen::Index n) {
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.cgaussian();
  return v;
}

Eigen::MatrixXcd cgaussian_matrix(RngStream& rng, Eigen::Index rows,
                                  Eigen::Index cols) {
  Eigen::MatrixXcd w(rows, cols);
  // Row-major fill so the draw order matches the (element, antenna) layout.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = rng.cgaussian();
  return w;
}

}  // namespace

double path_gain(double d, double alpha, double g0_db, double d0) {
  if (d <= 0.0 || d0 <= 0.0)
    throw std::domain_error("path_gain: distances must be positive");
  const double gain_db = g0_db - 10.0 * alpha * std::log10(d / d0);
  return std::pow(10.0, gain_db / 10.0);
}

Eigen::VectorXcd steering_bs(int n, double aod) {
  if (n < 1) throw std::invalid_argument("steering_bs: n must be >= 1");
  Eigen::VectorXcd a(n);
  const double step = kPi * std::sin(aod);
  for (int k = 0; k < n; ++k)
    a(k) = std::polar(1.0, step * static_cast<double>(k));
  return a;
}

Eigen::VectorXcd steering_irs(int m_x, int m_y, double az, double el) {
  if (m_x < 1 || m_y < 1)
    throw std::invalid_argument("steering_irs: grid dims must be >= 1");
  Eigen::VectorXcd a(static_cast<Eigen::Index>(m_x) * m_y);
  const double step_x = kPi * std::sin(az) * std::cos(el);
  const double step_y = kPi * std::sin(el);
  for (int p = 0; p < m_x; ++p)
    for (int q = 0; q < m_y; ++q)
      a(static_cast<Eigen::Index>(p) * m_y + q) =
          std::polar(1.0, p * step_x + q * step_y);
  return a;
}

ChannelSet sample_channels(RngStream& rng, const FadingParams& fading,
                           const LinkGeometry& geom) {
  if (fading.n_bs < 1 || fading.m_x < 1 || fading.m_y < 1)
    throw std::invalid_argument("sample_channels: bad dimensions");
  if (fading.k1 < 0.0 || fading.k2 < 0.0)
    throw std::invalid_argument("sample_channels: Ricean factors must be >= 0");

  const int n = fading.n_bs;
  const int m = fading.m();

  const double g_bu = path_gain(geom.d_bu, geom.alpha_bu, geom.g0_db, geom.d0);
  const double g_br = path_gain(geom.d_br, geom.alpha_br, geom.g0_db, geom.d0);
  const double g_ru = path_gain(geom.d_ru, geom.alpha_ru, geom.g0_db, geom.d0);

  ChannelSet ch;
  ch.bu_scale = std::sqrt(g_bu);
  ch.h_bu = ch.bu_scale * cgaussian_vector(rng, n);

  // Rank-1 LOS: IRS arrival response times BS departure response.
  const Eigen::VectorXcd a_bs = steering_bs(n, geom.bs_aod);
  const Eigen::VectorXcd a_irs_in =
      steering_irs(fading.m_x, fading.m_y, geom.irs_aoa_az, geom.irs_aoa_el);
  const Eigen::VectorXcd a_irs_out =
      steering_irs(fading.m_x, fading.m_y, geom.irs_aod_az, geom.irs_aod_el);

  // K = inf is the pure-LOS limit (diffuse weight 0).
  const auto los_weight = [](double g, double k) {
    return std::isinf(k) ? std::sqrt(g) : std::sqrt(g * k / (k + 1.0));
  };
  const auto diffuse_weight = [](double g, double k) {
    return std::isinf(k) ? 0.0 : std::sqrt(g / (k + 1.0));
  };

  const double los1 = los_weight(g_br, fading.k1);
  ch.br_scale = diffuse_weight(g_br, fading.k1);
  ch.br_los = los1 * (a_irs_in * a_bs.adjoint());
  ch.h_br = ch.br_los + ch.br_scale * cgaussian_matrix(rng, m, n);

  const double los2 = los_weight(g_ru, fading.k2);
  ch.ru_scale = diffuse_weight(g_ru, fading.k2);
  ch.ru_los = los2 * a_irs_out;
  ch.h_ru = ch.ru_los + ch.ru_scale * cgaussian_vector(rng, m);
  return ch;
}

ChannelSet perturb_channels(const ChannelSet& ch, double eps, RngStream& rng) {
  if (eps < 0.0 || eps > 1.0)
    throw std::domain_error("perturb_channels: eps must be in [0, 1]");

  // Exact identity at eps=1 (the LOS add/subtract below would otherwise
  // reintroduce rounding).
  if (eps == 1.0) return ch;

  const double keep = std::sqrt(eps);
  const double innovate = std::sqrt(1.0 - eps);

  ChannelSet out = ch;
  out.h_bu = keep * ch.h_bu +
             (innovate * ch.bu_scale) * cgaussian_vector(rng, ch.h_bu.size());

  const Eigen::MatrixXcd br_diffuse = ch.h_br - ch.br_los;
  out.h_br =
      ch.br_los + keep * br_diffuse +
      (innovate * ch.br_scale) *
          cgaussian_matrix(rng, ch.h_br.rows(), ch.h_br.cols());

  const Eigen::VectorXcd ru_diffuse = ch.h_ru - ch.ru_los;
  out.h_ru = ch.ru_los + keep * ru_diffuse +
             (innovate * ch.ru_scale) * cgaussian_vector(rng, ch.h_ru.size());
  return out;
}

ChannelSet rescale_mobility(const ChannelSet& ch, const LinkGeometry& geom,
                            double delta_d) {
  if (geom.d_bu + delta_d <= 0.0)
    throw std::domain_error("rescale_mobility: resulting distance <= 0");
  const double g_old = path_gain(geom.d_bu, geom.alpha_bu, geom.g0_db, geom.d0);
  const double g_new =
      path_gain(geom.d_bu + delta_d, geom.alpha_bu, geom.g0_db, geom.d0);
  const double scale = std::sqrt(g_new / g_old);

  ChannelSet out = ch;
  out.h_bu = scale * ch.h_bu;
  out.bu_scale = scale * ch.bu_scale;
  return out;
}

ChannelSet make_channels(Eigen::VectorXcd h_bu, Eigen::MatrixXcd h_br,
                         Eigen::VectorXcd h_ru) {
  ChannelSet ch;
  ch.br_los = Eigen::MatrixXcd::Zero(h_br.rows(), h_br.cols());
  ch.ru_los = Eigen::VectorXcd::Zero(h_ru.size());
  ch.h_bu = std::move(h_bu);
  ch.h_br = std::move(h_br);
  ch.h_ru = std::move(h_ru);
  return ch;
}

}  // namespace irsopt
