#include "irsopt/neural.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace irsopt {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNormEps = 1e-5;

Eigen::MatrixXd uniform_matrix(RngStream& rng, Eigen::Index rows,
                               Eigen::Index cols, double bound) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

MlpParams MlpParams::init(const ArchSpec& arch, RngStream& rng) {
  if (arch.num_layers() < 1)
    throw std::invalid_argument("MlpParams::init: need at least one layer");
  MlpParams params;
  params.arch = arch;
  const int depth = arch.num_layers();
  for (int l = 0; l < depth; ++l) {
    const int fan_in = arch.widths[l];
    const int fan_out = arch.widths[l + 1];
    const bool output_layer = (l == depth - 1);
    const double bound = output_layer ? 3e-3 : 1.0 / std::sqrt(fan_in);
    MlpParams::Layer layer;
    layer.w = uniform_matrix(rng, fan_out, fan_in, bound);
    layer.b = uniform_matrix(rng, fan_out, 1, bound);
    if (!output_layer) {
      layer.gain = Eigen::VectorXd::Ones(fan_out);
      layer.norm_bias = Eigen::VectorXd::Zero(fan_out);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input,
                        ForwardCache* cache) {
  if (input.rows() != params.arch.widths.front())
    throw std::invalid_argument("forward: input width mismatch");

  if (cache) {
    cache->input = input;
    cache->layers.clear();
  }

  const int depth = params.arch.num_layers();
  Eigen::MatrixXd x = input;
  for (int l = 0; l < depth; ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = (layer.w * x).colwise() + layer.b;
    ForwardCache::LayerCache lc;
    if (cache) lc.z = z;

    if (l == depth - 1) {
      if (params.arch.out_act == OutputActivation::kScaledPhase)
        x = kPi * (z.array().tanh() + 1.0).matrix();
      else
        x = std::move(z);
    } else {
      // Layer norm across units, per sample.
      const Eigen::Index units = z.rows();
      Eigen::RowVectorXd mean = z.colwise().mean();
      Eigen::MatrixXd centered = z.rowwise() - mean;
      Eigen::RowVectorXd var =
          centered.array().square().colwise().sum() / double(units);
      Eigen::RowVectorXd inv_std =
          (var.array() + kNormEps).sqrt().inverse();
      Eigen::MatrixXd xhat = centered.array().rowwise() * inv_std.array();
      Eigen::MatrixXd y =
          (xhat.array().colwise() * layer.gain.array()).colwise() +
          layer.norm_bias.array();
      x = y.cwiseMax(0.0);
      if (cache) {
        lc.xhat = xhat;
        lc.inv_std = inv_std;
      }
    }
    if (cache) {
      lc.act = x;
      cache->layers.push_back(std::move(lc));
    }
  }
  return x;
}

Eigen::VectorXd forward_one(const MlpParams& params,
                            const Eigen::VectorXd& input) {
  return forward(params, input);
}

GradientBundle backward(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream) {
  const int depth = params.arch.num_layers();
  if (static_cast<int>(cache.layers.size()) != depth)
    throw std::invalid_argument("backward: stale or mismatched cache");

  GradientBundle grads;
  grads.layers.resize(depth);

  Eigen::MatrixXd dx = upstream;  // gradient w.r.t. current layer output
  for (int l = depth - 1; l >= 0; --l) {
    const auto& layer = params.layers[l];
    const auto& lc = cache.layers[l];
    Eigen::MatrixXd dz;

    if (l == depth - 1) {
      if (params.arch.out_act == OutputActivation::kScaledPhase) {
        // act = pi*(tanh(z)+1); d act/dz = pi*(1 - tanh^2).
        Eigen::ArrayXXd t = lc.act.array() / kPi - 1.0;
        dz = (dx.array() * kPi * (1.0 - t.square())).matrix();
      } else {
        dz = dx;
      }
    } else {
      // ReLU.
      Eigen::MatrixXd dy =
          (dx.array() * (lc.act.array() > 0.0).cast<double>()).matrix();
      grads.layers[l].gain = (dy.array() * lc.xhat.array()).rowwise().sum();
      grads.layers[l].norm_bias = dy.rowwise().sum();
      Eigen::MatrixXd dxhat = dy.array().colwise() * layer.gain.array();
      const double units = static_cast<double>(dxhat.rows());
      Eigen::RowVectorXd mean_dxhat = dxhat.colwise().sum() / units;
      Eigen::RowVectorXd mean_dxhat_xhat =
          (dxhat.array() * lc.xhat.array()).colwise().sum() / units;
      dz = ((dxhat.rowwise() - mean_dxhat).array() -
            lc.xhat.array().rowwise() * mean_dxhat_xhat.array())
               .rowwise() *
           lc.inv_std.array();
    }

    const Eigen::MatrixXd& layer_input =
        (l == 0) ? cache.input : cache.layers[l - 1].act;
    grads.layers[l].w = dz * layer_input.transpose();
    grads.layers[l].b = dz.rowwise().sum();
    dx = layer.w.transpose() * dz;
  }
  grads.input_grad = std::move(dx);
  return grads;
}

AdamState AdamState::make(const MlpParams& params, double lr) {
  AdamState state;
  state.lr = lr;
  for (const auto& layer : params.layers) {
    AdamState::LayerMoments lm;
    lm.m_w = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
    lm.v_w = lm.m_w;
    lm.m_b = Eigen::VectorXd::Zero(layer.b.size());
    lm.v_b = lm.m_b;
    lm.m_gain = Eigen::VectorXd::Zero(layer.gain.size());
    lm.v_gain = lm.m_gain;
    lm.m_nb = Eigen::VectorXd::Zero(layer.norm_bias.size());
    lm.v_nb = lm.m_nb;
    state.layers.push_back(std::move(lm));
  }
  return state;
}

namespace {

template <typename Tensor>
void adam_update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                        const AdamState& s, double sign, double bc1,
                        double bc2) {
  if (param.size() == 0) return;
  m = s.beta1 * m + (1.0 - s.beta1) * sign * grad;
  v = (s.beta2 * v.array() + (1.0 - s.beta2) * grad.array().square()).matrix();
  param.array() -=
      s.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
}

}  // namespace

void adam_step(MlpParams& params, const GradientBundle& grads, AdamState& state,
               bool ascend) {
  if (grads.layers.size() != params.layers.size())
    throw std::invalid_argument("adam_step: gradient shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  const double sign = ascend ? -1.0 : 1.0;  // descend on -grad when ascending
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto& p = params.layers[l];
    const auto& g = grads.layers[l];
    auto& s = state.layers[l];
    adam_update_tensor(p.w, g.w, s.m_w, s.v_w, state, sign, bc1, bc2);
    adam_update_tensor(p.b, g.b, s.m_b, s.v_b, state, sign, bc1, bc2);
    adam_update_tensor(p.gain, g.gain, s.m_gain, s.v_gain, state, sign, bc1,
                       bc2);
    adam_update_tensor(p.norm_bias, g.norm_bias, s.m_nb, s.v_nb, state, sign,
                       bc1, bc2);
  }
}

void polyak_update(MlpParams& target, const MlpParams& online, double tau) {
  if (target.layers.size() != online.layers.size())
    throw std::invalid_argument("polyak_update: shape mismatch");
  for (size_t l = 0; l < target.layers.size(); ++l) {
    auto& t = target.layers[l];
    const auto& o = online.layers[l];
    t.w = tau * o.w + (1.0 - tau) * t.w;
    t.b = tau * o.b + (1.0 - tau) * t.b;
    if (t.gain.size()) t.gain = tau * o.gain + (1.0 - tau) * t.gain;
    if (t.norm_bias.size())
      t.norm_bias = tau * o.norm_bias + (1.0 - tau) * t.norm_bias;
  }
}

MlpParams perturb_params(const MlpParams& params, double sigma,
                         RngStream& rng) {
  if (sigma < 0.0)
    throw std::invalid_argument("perturb_params: sigma must be >= 0");
  MlpParams out = params;
  for (auto& layer : out.layers) {
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
        layer.w(r, c) += sigma * rng.gaussian();
    for (Eigen::Index i = 0; i < layer.b.size(); ++i)
      layer.b(i) += sigma * rng.gaussian();
    // Layer-norm gain/bias stay clean: they calibrate the adaptive
    // perturbation distance.
  }
  return out;
}

namespace {

nlohmann::json tensor_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat(m.size());
  // Row-major serialization.
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat[k++] = m(r, c);
  return nlohmann::json(flat);
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows,
                                 Eigen::Index cols) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw std::runtime_error("checkpoint: tensor size mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[k++];
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const MlpParams& params,
                     long train_step) {
  nlohmann::json j;
  j["version"] = "irsopt-ckpt-v1";
  j["widths"] = params.arch.widths;
  j["out_act"] = params.arch.out_act == OutputActivation::kScaledPhase
                     ? "scaled-phase"
                     : "linear";
  j["train_step"] = train_step;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : params.layers) {
    nlohmann::json lj;
    lj["w"] = tensor_to_json(layer.w);
    lj["b"] = tensor_to_json(layer.b);
    if (layer.gain.size()) {
      lj["gain"] = tensor_to_json(layer.gain);
      lj["norm_bias"] = tensor_to_json(layer.norm_bias);
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << j.dump() << "\n";
}

MlpParams load_checkpoint(const std::string& path, long* train_step) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("version", "") != std::string("irsopt-ckpt-v1"))
    throw std::runtime_error("load_checkpoint: unsupported version tag");

  MlpParams params;
  params.arch.widths = j.at("widths").get<std::vector<int>>();
  params.arch.out_act = j.at("out_act") == "scaled-phase"
                            ? OutputActivation::kScaledPhase
                            : OutputActivation::kLinear;
  const int depth = params.arch.num_layers();
  for (int l = 0; l < depth; ++l) {
    const auto& lj = j.at("layers").at(l);
    MlpParams::Layer layer;
    const Eigen::Index rows = params.arch.widths[l + 1];
    const Eigen::Index cols = params.arch.widths[l];
    layer.w = matrix_from_json(lj.at("w"), rows, cols);
    layer.b = matrix_from_json(lj.at("b"), rows, 1);
    if (lj.contains("gain")) {
      layer.gain = matrix_from_json(lj.at("gain"), rows, 1);
      layer.norm_bias = matrix_from_json(lj.at("norm_bias"), rows, 1);
    }
    params.layers.push_back(std::move(layer));
  }
  if (train_step) *train_step = j.value("train_step", 0L);
  return params;
}

}  // namespace irsopt
