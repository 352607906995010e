#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "irsopt/env.hpp"
#include "irsopt/neural.hpp"
#include "irsopt/system.hpp"

namespace irsopt {

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action_theta;
  double reward_db = 0.0;
  Eigen::VectorXd next_state;
  bool truncated = false;
};

// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return store_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return store_[i]; }
  // Uniform sample with replacement.
  std::vector<std::size_t> sample_indices(int batch, RngStream& rng) const;

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> store_;
};

struct NoiseState {
  double sigma_k = 0.1;      // parameter-noise std (sigma_0)
  double alpha_adapt = 1.01; // multiplicative adaptation factor
  double delta = 0.1;        // action-distance threshold [rad]
  double sigma_a = 0.1;      // action-noise std, normalized units
};

struct AgentConfig {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 64;
  int t_train = 1000;   // env steps between training phases
  int n_train = 50;     // gradient iterations per phase
  int t_adapt = 50;     // noise adaptation period within a phase
  long total_env_steps = 100000;
  double lr = 1e-3;
  std::size_t replay_capacity = 1000000;
  int hidden1 = 300;
  int hidden2 = 200;
  // Center/scale rewards for critic regression (running statistics);
  // the emitted curve always reports raw dB.
  bool normalize_reward = true;
  int eval_rollout_steps = 10;
};

struct EpisodeStat {
  int episode = 0;
  long env_steps = 0;
  double mean_reward_db = 0.0;
  double sigma_k = 0.0;
};

struct TrainingCurve {
  std::vector<EpisodeStat> episodes;
  int skipped_phases = 0;  // warm-up phases with replay < batch_size
};

class DdpgAgent {
 public:
  DdpgAgent(int num_elements, const AgentConfig& cfg, NoiseState noise,
            std::uint64_t seed);

  // Perturbed-policy action: parameter-noise actor plus clipped Gaussian
  // action noise (sigma_a * pi radians), coordinates in [0, 2*pi].
  PhaseConfig select_action(const Eigen::VectorXd& state);

  // One regression step of the critic toward the bootstrapped target;
  // returns the pre-step loss.
  double critic_update(const std::vector<Transition>& batch);

  // One ascent step on the actor through the frozen critic; returns the
  // batch-mean Q estimate.
  double actor_update(const Eigen::MatrixXd& states);

  // Parameter-noise scale adaptation against a probe state batch.
  void adapt_noise(const Eigen::MatrixXd& probe_states);

  TrainingCurve train(EnvInterface& env);

  const MlpParams& actor() const { return actor_; }
  const MlpParams& critic() const { return critic_; }
  const NoiseState& noise() const { return noise_; }
  const AgentConfig& config() const { return cfg_; }
  ReplayBuffer& replay() { return replay_; }

  void set_actor(MlpParams params);
  void resample_perturbed_actor();

  void save(const std::string& path) const;
  static MlpParams load_actor(const std::string& path);

 private:
  Eigen::MatrixXd action_features(const Eigen::MatrixXd& theta) const;
  double normalized_reward(double reward_db) const;
  void observe_reward(double reward_db);

  int m_;
  AgentConfig cfg_;
  NoiseState noise_;
  RngStream param_noise_rng_;
  RngStream action_noise_rng_;
  RngStream sample_rng_;

  MlpParams actor_, critic_;
  MlpParams target_actor_, target_critic_;
  MlpParams perturbed_actor_;
  AdamState actor_adam_, critic_adam_;
  ReplayBuffer replay_;
  long train_steps_ = 0;

  // Running reward statistics (Welford).
  long reward_count_ = 0;
  double reward_mean_ = 0.0;
  double reward_m2_ = 0.0;
};

// Evaluation protocol: roll the deterministic actor `steps` times from the
// given reset state and return the phases of the best-reward step.
PhaseConfig greedy_phases_from(const MlpParams& actor, EnvInterface& env,
                               const Eigen::VectorXd& initial_state,
                               int steps = 10, double* best_reward = nullptr);
PhaseConfig greedy_phases(const MlpParams& actor, EnvInterface& env,
                          int steps = 10, double* best_reward = nullptr);

// CSV columns: episode, env_steps, mean_reward_db, sigma_k.
void write_training_curve(const std::string& path, const TrainingCurve& curve);

}  // namespace irsopt
