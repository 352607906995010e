#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <limits>

#include "doctest.h"
#include "irsopt/channel.hpp"

using namespace irsopt;

namespace {
constexpr double kPi = 3.14159265358979323846;

double db(double lin) { return 10.0 * std::log10(lin); }
}  // namespace

TEST_CASE("path_gain reference values") {
  CHECK(path_gain(1.0, 2.0, -30.0, 1.0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(path_gain(10.0, 2.0, -30.0, 1.0) == doctest::Approx(1e-5).epsilon(1e-12));
  // 48 m at alpha=2: -30 - 20*log10(48) = -63.625 dB (3 d.p.)
  CHECK(db(path_gain(48.0, 2.0, -30.0, 1.0)) ==
        doctest::Approx(-30.0 - 20.0 * std::log10(48.0)).epsilon(1e-12));
  CHECK(db(path_gain(48.0, 2.0, -30.0, 1.0)) == doctest::Approx(-63.625).epsilon(1e-5));
}

TEST_CASE("path_gain domain errors and monotonicity") {
  CHECK_THROWS_AS(path_gain(0.0, 2.0, -30.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(path_gain(-3.0, 2.0, -30.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(path_gain(1.0, 2.0, -30.0, 0.0), std::domain_error);
  CHECK(path_gain(2.0, 2.0, -30.0, 2.0) == doctest::Approx(1e-3));  // d == d0
  double prev = path_gain(1.0, 2.8, -30.0, 1.0);
  for (double d = 2.0; d <= 100.0; d += 7.0) {
    const double g = path_gain(d, 2.8, -30.0, 1.0);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("steering_bs reference values") {
  const Eigen::VectorXcd ones = steering_bs(4, 0.0);
  for (int k = 0; k < 4; ++k)
    CHECK(std::abs(ones(k) - std::complex<double>(1.0, 0.0)) < 1e-15);

  const Eigen::VectorXcd two = steering_bs(2, kPi / 2.0);
  CHECK(std::abs(two(0) - std::complex<double>(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(two(1) - std::complex<double>(-1.0, 0.0)) < 1e-12);

  const Eigen::VectorXcd three = steering_bs(3, kPi / 6.0);
  for (int k = 0; k < 3; ++k)
    CHECK(std::abs(three(k) - std::polar(1.0, kPi * k / 2.0)) < 1e-12);
}

TEST_CASE("steering_irs reference values") {
  const Eigen::VectorXcd ones = steering_irs(2, 2, 0.0, 0.0);
  REQUIRE(ones.size() == 4);
  for (int k = 0; k < 4; ++k)
    CHECK(std::abs(ones(k) - std::complex<double>(1.0, 0.0)) < 1e-15);

  const Eigen::VectorXcd two = steering_irs(2, 1, kPi / 2.0, 0.0);
  CHECK(std::abs(two(0) - std::complex<double>(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(two(1) - std::complex<double>(-1.0, 0.0)) < 1e-12);

  // Degenerate single row: only the el-dependent phase survives.
  const Eigen::VectorXcd row = steering_irs(1, 5, 0.7, 0.3);
  for (int q = 0; q < 5; ++q)
    CHECK(std::abs(row(q) - std::polar(1.0, kPi * q * std::sin(0.3))) < 1e-12);
}

TEST_CASE("steering vectors are unit modulus") {
  for (double ang : {-1.2, -0.3, 0.0, 0.4, 1.1}) {
    const Eigen::VectorXcd a = steering_bs(7, ang);
    for (Eigen::Index k = 0; k < a.size(); ++k)
      CHECK(std::abs(std::abs(a(k)) - 1.0) < 1e-14);
    const Eigen::VectorXcd b = steering_irs(3, 4, ang, 0.5 * ang);
    for (Eigen::Index k = 0; k < b.size(); ++k)
      CHECK(std::abs(std::abs(b(k)) - 1.0) < 1e-14);
  }
}

TEST_CASE("sample_channels pure-LOS limit is deterministic") {
  RngStream rng(11);
  FadingParams fading{3, 2, 2, std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity()};
  LinkGeometry geom;
  const ChannelSet ch = sample_channels(rng, fading, geom);

  const double g_br = path_gain(geom.d_br, geom.alpha_br, geom.g0_db, geom.d0);
  const double g_ru = path_gain(geom.d_ru, geom.alpha_ru, geom.g0_db, geom.d0);
  const Eigen::MatrixXcd h_br_expect =
      std::sqrt(g_br) * steering_irs(2, 2, geom.irs_aoa_az, geom.irs_aoa_el) *
      steering_bs(3, geom.bs_aod).adjoint();
  CHECK((ch.h_br - h_br_expect).norm() < 1e-14);
  const Eigen::VectorXcd h_ru_expect =
      std::sqrt(g_ru) * steering_irs(2, 2, geom.irs_aod_az, geom.irs_aod_el);
  CHECK((ch.h_ru - h_ru_expect).norm() < 1e-14);
  CHECK(ch.br_scale == 0.0);
  CHECK(ch.ru_scale == 0.0);
}

TEST_CASE("sample_channels pure-NLOS channels are zero mean") {
  RngStream rng(12);
  FadingParams fading{2, 2, 1, 0.0, 0.0};
  LinkGeometry geom;
  const int draws = 100000;
  std::complex<double> acc_br = 0.0, acc_ru = 0.0, acc_bu = 0.0;
  for (int t = 0; t < draws; ++t) {
    const ChannelSet ch = sample_channels(rng, fading, geom);
    acc_bu += ch.h_bu(0);
    acc_br += ch.h_br(0, 0);
    acc_ru += ch.h_ru(0);
  }
  const double g_bu = path_gain(geom.d_bu, geom.alpha_bu, geom.g0_db, geom.d0);
  const double g_br = path_gain(geom.d_br, geom.alpha_br, geom.g0_db, geom.d0);
  const double g_ru = path_gain(geom.d_ru, geom.alpha_ru, geom.g0_db, geom.d0);
  CHECK(std::abs(acc_bu / double(draws)) < 0.02 * std::sqrt(g_bu));
  CHECK(std::abs(acc_br / double(draws)) < 0.02 * std::sqrt(g_br));
  CHECK(std::abs(acc_ru / double(draws)) < 0.02 * std::sqrt(g_ru));
}

TEST_CASE("sample_channels K=10 LOS/NLOS power ratio") {
  RngStream rng(13);
  FadingParams fading{2, 2, 1, 10.0, 10.0};
  LinkGeometry geom;
  const int draws = 100000;
  double los_pow = 0.0, nlos_pow = 0.0;
  for (int t = 0; t < draws; ++t) {
    const ChannelSet ch = sample_channels(rng, fading, geom);
    los_pow += ch.br_los(1, 1).real() * ch.br_los(1, 1).real() +
               ch.br_los(1, 1).imag() * ch.br_los(1, 1).imag();
    nlos_pow += std::norm(ch.h_br(1, 1) - ch.br_los(1, 1));
  }
  CHECK(los_pow / nlos_pow == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("sample_channels second moment of h_bu matches the path gain") {
  RngStream rng(14);
  FadingParams fading{2, 1, 1, 10.0, 10.0};
  LinkGeometry geom;
  const int draws = 100000;
  double acc = 0.0;
  for (int t = 0; t < draws; ++t)
    acc += sample_channels(rng, fading, geom).h_bu.squaredNorm();
  const double g_bu = path_gain(geom.d_bu, geom.alpha_bu, geom.g0_db, geom.d0);
  CHECK(acc / (draws * 2.0) == doctest::Approx(g_bu).epsilon(0.05));
}

TEST_CASE("perturb_channels endpoints") {
  RngStream rng(15);
  const FadingParams fading{3, 2, 2, 10.0, 10.0};
  const LinkGeometry geom;
  const ChannelSet ch = sample_channels(rng, fading, geom);

  SUBCASE("eps=1 is the exact identity") {
    const ChannelSet same = perturb_channels(ch, 1.0, rng);
    CHECK(same.h_bu == ch.h_bu);
    CHECK(same.h_br == ch.h_br);
    CHECK(same.h_ru == ch.h_ru);
  }
  SUBCASE("eps=0 is statistically fresh") {
    // Correlation of a diffuse entry with its origin vanishes over draws.
    const int draws = 4000;
    std::complex<double> corr = 0.0;
    for (int t = 0; t < draws; ++t) {
      const ChannelSet p = perturb_channels(ch, 0.0, rng);
      corr += p.h_bu(0) * std::conj(ch.h_bu(0));
    }
    corr /= double(draws) * std::norm(ch.h_bu(0));
    CHECK(std::abs(corr) < 0.1);
  }
  SUBCASE("eps out of range throws") {
    RngStream r2(1);
    CHECK_THROWS_AS(perturb_channels(ch, -0.1, r2), std::domain_error);
    CHECK_THROWS_AS(perturb_channels(ch, 1.1, r2), std::domain_error);
  }
}

TEST_CASE("perturb_channels preserves second moments") {
  LinkGeometry geom;
  geom.d_bu = 1.0;  // unit per-entry variance on the direct link
  geom.g0_db = 0.0;
  const FadingParams fading{2, 2, 1, 10.0, 10.0};
  RngStream rng(16);
  for (double eps : {0.9, 0.5}) {
    const int draws = 100000;
    double acc = 0.0;
    for (int t = 0; t < draws; ++t) {
      const ChannelSet ch = sample_channels(rng, fading, geom);
      const ChannelSet p = perturb_channels(ch, eps, rng);
      acc += std::norm(p.h_bu(0));
    }
    CHECK(acc / draws == doctest::Approx(1.0).epsilon(0.03));
  }
}

TEST_CASE("perturb_channels keeps the LOS part deterministic") {
  RngStream rng(17);
  const FadingParams fading{2, 2, 2, 5.0, 5.0};
  const LinkGeometry geom;
  const ChannelSet ch = sample_channels(rng, fading, geom);
  const ChannelSet p = perturb_channels(ch, 0.5, rng);
  CHECK(p.br_los == ch.br_los);
  CHECK(p.ru_los == ch.ru_los);
}

TEST_CASE("rescale_mobility reference behavior") {
  RngStream rng(18);
  const FadingParams fading{3, 2, 2, 10.0, 10.0};
  LinkGeometry geom;
  const ChannelSet ch = sample_channels(rng, fading, geom);

  SUBCASE("delta 0 is the identity") {
    const ChannelSet same = rescale_mobility(ch, geom, 0.0);
    CHECK(same.h_bu == ch.h_bu);
    CHECK(same.h_br == ch.h_br);
    CHECK(same.h_ru == ch.h_ru);
  }
  SUBCASE("doubling the distance at alpha=2 halves the norm") {
    const ChannelSet far = rescale_mobility(ch, geom, geom.d_bu);
    CHECK(far.h_bu.norm() == doctest::Approx(0.5 * ch.h_bu.norm()).epsilon(1e-12));
    CHECK(far.h_br == ch.h_br);
    CHECK(far.h_ru == ch.h_ru);
  }
  SUBCASE("48 m plus 25 m at alpha=2 scales amplitudes by 48/73") {
    REQUIRE(geom.d_bu == 48.0);
    const ChannelSet far = rescale_mobility(ch, geom, 25.0);
    CHECK((far.h_bu - (48.0 / 73.0) * ch.h_bu).norm() < 1e-15);
  }
  SUBCASE("rescaling composes multiplicatively") {
    const ChannelSet a = rescale_mobility(ch, geom, 7.0);
    LinkGeometry moved = geom;
    moved.d_bu += 7.0;
    const ChannelSet ab = rescale_mobility(a, moved, 6.0);
    const ChannelSet direct = rescale_mobility(ch, geom, 13.0);
    CHECK((ab.h_bu - direct.h_bu).norm() <= 1e-12 * direct.h_bu.norm());
  }
  SUBCASE("negative resulting distance throws") {
    CHECK_THROWS_AS(rescale_mobility(ch, geom, -geom.d_bu), std::domain_error);
  }
}

TEST_CASE("sample_channels is reproducible per stream") {
  const FadingParams fading{3, 2, 2, 10.0, 10.0};
  const LinkGeometry geom;
  RngStream a(42), b(42);
  const ChannelSet ca = sample_channels(a, fading, geom);
  const ChannelSet cb = sample_channels(b, fading, geom);
  CHECK(ca.h_bu == cb.h_bu);
  CHECK(ca.h_br == cb.h_br);
  CHECK(ca.h_ru == cb.h_ru);
}
