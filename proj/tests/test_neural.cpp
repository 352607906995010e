#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <string>

#include "doctest.h"
#include "irsopt/neural.hpp"

using namespace irsopt;

namespace {
constexpr double kPi = 3.14159265358979323846;

MlpParams zero_net(const ArchSpec& arch) {
  RngStream rng(1);
  MlpParams p = MlpParams::init(arch, rng);
  for (auto& layer : p.layers) {
    layer.w.setZero();
    layer.b.setZero();
  }
  return p;
}

// Scalar objective sum(forward(input) .* upstream), the quantity backward
// differentiates.
double objective(const MlpParams& p, const Eigen::MatrixXd& input,
                 const Eigen::MatrixXd& upstream) {
  return (forward(p, input).array() * upstream.array()).sum();
}

// Mixed criterion: relative error 1e-5 with an absolute guard for
// coordinates whose gradient is at finite-difference roundoff scale.
double rel_err(double a, double b) {
  return std::abs(a - b) / (std::max(std::abs(a), std::abs(b)) + 1e-5);
}

void check_fd(const MlpParams& p, const Eigen::MatrixXd& input,
              const Eigen::MatrixXd& upstream) {
  ForwardCache cache;
  forward(p, input, &cache);
  const GradientBundle g = backward(p, cache, upstream);
  const double h = 1e-5;

  MlpParams probe = p;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto fd_tensor = [&](Eigen::MatrixXd& tensor, const Eigen::MatrixXd& grad) {
      for (Eigen::Index i = 0; i < tensor.size(); ++i) {
        const double keep = tensor(i);
        tensor(i) = keep + h;
        const double up = objective(probe, input, upstream);
        tensor(i) = keep - h;
        const double down = objective(probe, input, upstream);
        tensor(i) = keep;
        const double fd = (up - down) / (2.0 * h);
        CHECK(rel_err(fd, grad(i)) <= 1e-5);
      }
    };
    fd_tensor(probe.layers[l].w, g.layers[l].w);
    Eigen::MatrixXd b = probe.layers[l].b, gb = g.layers[l].b;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double keep = probe.layers[l].b(i);
      probe.layers[l].b(i) = keep + h;
      const double up = objective(probe, input, upstream);
      probe.layers[l].b(i) = keep - h;
      const double down = objective(probe, input, upstream);
      probe.layers[l].b(i) = keep;
      CHECK(rel_err((up - down) / (2.0 * h), g.layers[l].b(i)) <= 1e-5);
    }
    if (probe.layers[l].gain.size() > 0) {
      for (Eigen::Index i = 0; i < probe.layers[l].gain.size(); ++i) {
        const double keep = probe.layers[l].gain(i);
        probe.layers[l].gain(i) = keep + h;
        const double up = objective(probe, input, upstream);
        probe.layers[l].gain(i) = keep - h;
        const double down = objective(probe, input, upstream);
        probe.layers[l].gain(i) = keep;
        CHECK(rel_err((up - down) / (2.0 * h), g.layers[l].gain(i)) <= 1e-5);
      }
      for (Eigen::Index i = 0; i < probe.layers[l].norm_bias.size(); ++i) {
        const double keep = probe.layers[l].norm_bias(i);
        probe.layers[l].norm_bias(i) = keep + h;
        const double up = objective(probe, input, upstream);
        probe.layers[l].norm_bias(i) = keep - h;
        const double down = objective(probe, input, upstream);
        probe.layers[l].norm_bias(i) = keep;
        CHECK(rel_err((up - down) / (2.0 * h), g.layers[l].norm_bias(i)) <= 1e-5);
      }
    }
  }

  // Input gradient.
  Eigen::MatrixXd x = input;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = objective(p, x, upstream);
    x(i) = keep - h;
    const double down = objective(p, x, upstream);
    x(i) = keep;
    CHECK(rel_err((up - down) / (2.0 * h), g.input_grad(i)) <= 1e-5);
  }
}
}  // namespace

TEST_CASE("forward with zero parameters") {
  SUBCASE("scaled-phase outputs sit at the tanh midpoint pi") {
    const MlpParams p =
        zero_net(ArchSpec{{3, 4, 3, 2}, OutputActivation::kScaledPhase});
    const Eigen::VectorXd out = forward_one(p, Eigen::VectorXd::Constant(3, 0.7));
    REQUIRE(out.size() == 2);
    CHECK(out(0) == doctest::Approx(kPi));
    CHECK(out(1) == doctest::Approx(kPi));
  }
  SUBCASE("linear outputs are zero") {
    const MlpParams p = zero_net(ArchSpec{{3, 4, 3, 1}, OutputActivation::kLinear});
    CHECK(forward_one(p, Eigen::VectorXd::Constant(3, -2.0))(0) == 0.0);
  }
}

TEST_CASE("scaled-phase outputs stay strictly inside (0, 2pi)") {
  RngStream rng(2);
  const MlpParams p = MlpParams::init(
      ArchSpec{{4, 8, 6, 3}, OutputActivation::kScaledPhase}, rng);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = 5.0 * rng.gaussian();
    const Eigen::VectorXd out = forward_one(p, x);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::isfinite(out(j)));
      CHECK(out(j) > 0.0);
      CHECK(out(j) < 2.0 * kPi);
    }
  }
}

TEST_CASE("layer normalization yields zero mean and unit variance pre-gain") {
  RngStream rng(3);
  const MlpParams p =
      MlpParams::init(ArchSpec{{5, 7, 6, 2}, OutputActivation::kLinear}, rng);
  // Large inputs so the activation variance dwarfs the 1e-5 stabilizer.
  Eigen::MatrixXd input(5, 3);
  for (Eigen::Index i = 0; i < input.size(); ++i)
    input(i) = 1e3 * rng.gaussian();
  ForwardCache cache;
  forward(p, input, &cache);
  for (int l = 0; l < 2; ++l) {
    const Eigen::MatrixXd& xhat = cache.layers[l].xhat;
    const Eigen::MatrixXd& z = cache.layers[l].z;
    for (Eigen::Index col = 0; col < xhat.cols(); ++col) {
      CHECK(std::abs(xhat.col(col).mean()) < 1e-6);
      const double var = xhat.col(col).squaredNorm() / double(xhat.rows());
      // The stabilizer biases the variance to v/(v + 1e-5) exactly.
      const Eigen::VectorXd centered =
          z.col(col).array() - z.col(col).mean();
      const double v = centered.squaredNorm() / double(z.rows());
      CHECK(var == doctest::Approx(v / (v + 1e-5)).epsilon(1e-6));
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
  }
}

TEST_CASE("forward is bit-deterministic") {
  RngStream rng(4);
  const MlpParams p = MlpParams::init(
      ArchSpec{{4, 6, 5, 2}, OutputActivation::kScaledPhase}, rng);
  Eigen::VectorXd x(4);
  for (int i = 0; i < 4; ++i) x(i) = rng.gaussian();
  const Eigen::VectorXd a = forward_one(p, x);
  const Eigen::VectorXd b = forward_one(p, x);
  CHECK(a == b);
}

TEST_CASE("backward with zero upstream gives zero gradients") {
  RngStream rng(5);
  const MlpParams p =
      MlpParams::init(ArchSpec{{3, 4, 3, 2}, OutputActivation::kLinear}, rng);
  Eigen::MatrixXd input(3, 2);
  for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.gaussian();
  ForwardCache cache;
  forward(p, input, &cache);
  const GradientBundle g = backward(p, cache, Eigen::MatrixXd::Zero(2, 2));
  for (const auto& lg : g.layers) {
    CHECK(lg.w.cwiseAbs().maxCoeff() == 0.0);
    CHECK(lg.b.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(g.input_grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradients match central finite differences") {
  RngStream rng(6);
  SUBCASE("linear output head (critic shape)") {
    const MlpParams p =
        MlpParams::init(ArchSpec{{5, 4, 3, 1}, OutputActivation::kLinear}, rng);
    Eigen::MatrixXd input(5, 3), upstream(1, 3);
    for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.gaussian();
    for (Eigen::Index i = 0; i < upstream.size(); ++i)
      upstream(i) = rng.gaussian();
    check_fd(p, input, upstream);
  }
  SUBCASE("scaled-phase output head (actor shape)") {
    const MlpParams p = MlpParams::init(
        ArchSpec{{3, 4, 3, 2}, OutputActivation::kScaledPhase}, rng);
    Eigen::MatrixXd input(3, 2), upstream(2, 2);
    for (Eigen::Index i = 0; i < input.size(); ++i) input(i) = rng.gaussian();
    for (Eigen::Index i = 0; i < upstream.size(); ++i)
      upstream(i) = rng.gaussian();
    check_fd(p, input, upstream);
  }
}

TEST_CASE("adam_step reference behavior") {
  RngStream rng(7);
  const ArchSpec arch{{2, 3, 3, 1}, OutputActivation::kLinear};
  SUBCASE("zero gradients leave parameters unchanged") {
    MlpParams p = MlpParams::init(arch, rng);
    const MlpParams before = p;
    AdamState st = AdamState::make(p, 1e-3);
    ForwardCache cache;
    forward(p, Eigen::MatrixXd::Constant(2, 1, 0.3), &cache);
    GradientBundle g = backward(p, cache, Eigen::MatrixXd::Zero(1, 1));
    adam_step(p, g, st);
    for (size_t l = 0; l < p.layers.size(); ++l) {
      CHECK(p.layers[l].w == before.layers[l].w);
      CHECK(p.layers[l].b == before.layers[l].b);
    }
  }
  SUBCASE("first step moves each coordinate by about lr against the gradient") {
    MlpParams p = MlpParams::init(arch, rng);
    const MlpParams before = p;
    AdamState st = AdamState::make(p, 1e-3);
    GradientBundle g;
    g.layers.resize(p.layers.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
      g.layers[l].w = Eigen::MatrixXd::Constant(p.layers[l].w.rows(),
                                                p.layers[l].w.cols(), 2.5);
      g.layers[l].b = Eigen::VectorXd::Constant(p.layers[l].b.size(), -1.25);
      g.layers[l].gain = Eigen::VectorXd::Zero(p.layers[l].gain.size());
      g.layers[l].norm_bias = Eigen::VectorXd::Zero(p.layers[l].norm_bias.size());
    }
    adam_step(p, g, st);
    for (size_t l = 0; l < p.layers.size(); ++l) {
      const Eigen::MatrixXd dw = p.layers[l].w - before.layers[l].w;
      CHECK(dw.maxCoeff() == doctest::Approx(-1e-3).epsilon(1e-4));
      const Eigen::VectorXd db = p.layers[l].b - before.layers[l].b;
      CHECK(db.minCoeff() == doctest::Approx(1e-3).epsilon(1e-4));
    }
  }
  SUBCASE("ascend mirrors descend with negated gradients") {
    MlpParams up = MlpParams::init(arch, rng);
    MlpParams down = up;
    AdamState st_up = AdamState::make(up, 1e-3);
    AdamState st_down = AdamState::make(down, 1e-3);
    GradientBundle g, neg;
    g.layers.resize(up.layers.size());
    neg.layers.resize(up.layers.size());
    RngStream grng(8);
    for (size_t l = 0; l < up.layers.size(); ++l) {
      g.layers[l].w.resize(up.layers[l].w.rows(), up.layers[l].w.cols());
      for (Eigen::Index i = 0; i < g.layers[l].w.size(); ++i)
        g.layers[l].w(i) = grng.gaussian();
      g.layers[l].b.resize(up.layers[l].b.size());
      for (Eigen::Index i = 0; i < g.layers[l].b.size(); ++i)
        g.layers[l].b(i) = grng.gaussian();
      g.layers[l].gain = Eigen::VectorXd::Zero(up.layers[l].gain.size());
      g.layers[l].norm_bias = Eigen::VectorXd::Zero(up.layers[l].norm_bias.size());
      neg.layers[l].w = -g.layers[l].w;
      neg.layers[l].b = -g.layers[l].b;
      neg.layers[l].gain = g.layers[l].gain;
      neg.layers[l].norm_bias = g.layers[l].norm_bias;
    }
    adam_step(up, g, st_up, /*ascend=*/true);
    adam_step(down, neg, st_down, /*ascend=*/false);
    for (size_t l = 0; l < up.layers.size(); ++l) {
      CHECK((up.layers[l].w - down.layers[l].w).cwiseAbs().maxCoeff() < 1e-15);
      CHECK((up.layers[l].b - down.layers[l].b).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("polyak_update blends parameters") {
  RngStream rng(9);
  const ArchSpec arch{{2, 3, 3, 1}, OutputActivation::kLinear};
  const MlpParams online = MlpParams::init(arch, rng);
  MlpParams target = MlpParams::init(arch, rng);
  SUBCASE("tau=1 copies, tau=0 freezes") {
    MlpParams t1 = target;
    polyak_update(t1, online, 1.0);
    CHECK(t1.layers[0].w == online.layers[0].w);
    MlpParams t0 = target;
    polyak_update(t0, online, 0.0);
    CHECK(t0.layers[0].w == target.layers[0].w);
  }
  SUBCASE("tau=0.5 is the exact midpoint") {
    MlpParams t = target;
    polyak_update(t, online, 0.5);
    const Eigen::MatrixXd mid =
        0.5 * (target.layers[1].w + online.layers[1].w);
    CHECK((t.layers[1].w - mid).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::VectorXd gmid =
        0.5 * (target.layers[0].gain + online.layers[0].gain);
    CHECK((t.layers[0].gain - gmid).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("repeated updates converge geometrically") {
    MlpParams t = target;
    const double tau = 0.25;
    double prev = (t.layers[0].w - online.layers[0].w).norm();
    for (int k = 0; k < 10; ++k) {
      polyak_update(t, online, tau);
      const double cur = (t.layers[0].w - online.layers[0].w).norm();
      CHECK(cur == doctest::Approx((1.0 - tau) * prev).epsilon(1e-10));
      prev = cur;
    }
  }
}

TEST_CASE("perturb_params noise contract") {
  RngStream rng(10);
  const MlpParams p = MlpParams::init(
      ArchSpec{{200, 300, 200, 5}, OutputActivation::kScaledPhase}, rng);
  SUBCASE("sigma=0 is an exact copy") {
    RngStream nrng(11);
    const MlpParams q = perturb_params(p, 0.0, nrng);
    for (size_t l = 0; l < p.layers.size(); ++l) {
      CHECK(q.layers[l].w == p.layers[l].w);
      CHECK(q.layers[l].b == p.layers[l].b);
    }
  }
  SUBCASE("noise std matches sigma on a 300x200 layer") {
    RngStream nrng(12);
    const double sigma = 0.05;
    const MlpParams q = perturb_params(p, sigma, nrng);
    const Eigen::MatrixXd diff = q.layers[1].w - p.layers[1].w;
    const double std_hat = std::sqrt(diff.squaredNorm() / double(diff.size()));
    CHECK(std_hat == doctest::Approx(sigma).epsilon(0.05));
    CHECK(std::abs(diff.mean()) < 0.01 * sigma * 50);
  }
  SUBCASE("layer-norm parameters are never perturbed") {
    RngStream nrng(13);
    const MlpParams q = perturb_params(p, 0.5, nrng);
    for (size_t l = 0; l + 1 < p.layers.size(); ++l) {
      CHECK(q.layers[l].gain == p.layers[l].gain);
      CHECK(q.layers[l].norm_bias == p.layers[l].norm_bias);
    }
    CHECK(q.layers[0].w != p.layers[0].w);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  RngStream rng(14);
  const MlpParams p = MlpParams::init(
      ArchSpec{{4, 6, 5, 3}, OutputActivation::kScaledPhase}, rng);
  const std::string path = "ckpt_roundtrip_test.json";
  save_checkpoint(path, p, 1234);
  long step = 0;
  const MlpParams q = load_checkpoint(path, &step);
  std::remove(path.c_str());
  CHECK(step == 1234);
  CHECK(q.arch == p.arch);
  for (size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(q.layers[l].w == p.layers[l].w);
    CHECK(q.layers[l].b == p.layers[l].b);
    CHECK(q.layers[l].gain == p.layers[l].gain);
    CHECK(q.layers[l].norm_bias == p.layers[l].norm_bias);
  }
}

TEST_CASE("load_checkpoint rejects missing files") {
  CHECK_THROWS(load_checkpoint("definitely_not_a_real_checkpoint.json"));
}
