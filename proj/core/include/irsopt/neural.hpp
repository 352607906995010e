#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irsopt/rng.hpp"

namespace irsopt {

enum class OutputActivation { kScaledPhase, kLinear };

struct ArchSpec {
  std::vector<int> widths;  // input, hidden..., output
  OutputActivation out_act = OutputActivation::kLinear;

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  bool operator==(const ArchSpec&) const = default;
};

// Weights, biases and layer-norm parameters of a fixed feedforward net.
// Hidden layers: affine -> layer norm -> ReLU. Output layer: affine, then
// either identity or the phase squashing pi*(tanh(z)+1) into (0, 2*pi).
struct MlpParams {
  struct Layer {
    Eigen::MatrixXd w;  // out x in
    Eigen::VectorXd b;
    Eigen::VectorXd gain;       // empty on the output layer
    Eigen::VectorXd norm_bias;  // empty on the output layer
  };

  ArchSpec arch;
  std::vector<Layer> layers;

  // Uniform +-1/sqrt(fan_in) hidden init, +-3e-3 on the output layer.
  static MlpParams init(const ArchSpec& arch, RngStream& rng);
};

// Batch convention: columns are samples.
struct ForwardCache {
  struct LayerCache {
    Eigen::MatrixXd z;        // affine output
    Eigen::MatrixXd xhat;     // normalized activations (hidden only)
    Eigen::RowVectorXd inv_std;
    Eigen::MatrixXd act;      // layer output
  };
  Eigen::MatrixXd input;
  std::vector<LayerCache> layers;
};

struct GradientBundle {
  struct LayerGrad {
    Eigen::MatrixXd w;
    Eigen::VectorXd b;
    Eigen::VectorXd gain;
    Eigen::VectorXd norm_bias;
  };
  std::vector<LayerGrad> layers;
  Eigen::MatrixXd input_grad;
};

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& input,
                        ForwardCache* cache = nullptr);
Eigen::VectorXd forward_one(const MlpParams& params,
                            const Eigen::VectorXd& input);

// Exact reverse-mode gradients of sum(output .* upstream) with respect to
// all parameters and the input.
GradientBundle backward(const MlpParams& params, const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream);

struct AdamState {
  struct LayerMoments {
    Eigen::MatrixXd m_w, v_w;
    Eigen::VectorXd m_b, v_b;
    Eigen::VectorXd m_gain, v_gain;
    Eigen::VectorXd m_nb, v_nb;
  };
  std::vector<LayerMoments> layers;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState make(const MlpParams& params, double lr);
};

// Bias-corrected adaptive-moment update; `ascend` flips the gradient sign.
void adam_step(MlpParams& params, const GradientBundle& grads, AdamState& state,
               bool ascend = false);

// target <- tau*online + (1-tau)*target, all parameter tensors.
void polyak_update(MlpParams& target, const MlpParams& online, double tau);

// Copy with N(0, sigma^2) noise added to linear weights and biases only;
// layer-norm gains and biases are left untouched.
MlpParams perturb_params(const MlpParams& params, double sigma, RngStream& rng);

// Checkpoint container, version tag "irsopt-ckpt-v1".
void save_checkpoint(const std::string& path, const MlpParams& params,
                     long train_step);
MlpParams load_checkpoint(const std::string& path, long* train_step = nullptr);

}  // namespace irsopt
