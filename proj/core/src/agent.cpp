#include "irsopt/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace irsopt {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;
constexpr double kSigmaMin = 1e-6;
constexpr double kSigmaMax = 10.0;
}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0)
    throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  store_.reserve(std::min<std::size_t>(capacity_, 1 << 20));
}

void ReplayBuffer::push(Transition t) {
  if (store_.size() < capacity_) {
    store_.push_back(std::move(t));
  } else {
    store_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(int batch,
                                                      RngStream& rng) const {
  if (store_.empty())
    throw std::logic_error("ReplayBuffer::sample_indices: buffer empty");
  std::vector<std::size_t> idx(batch);
  for (int i = 0; i < batch; ++i)
    idx[i] = static_cast<std::size_t>(rng.uniform() * store_.size());
  return idx;
}

DdpgAgent::DdpgAgent(int num_elements, const AgentConfig& cfg, NoiseState noise,
                     std::uint64_t seed)
    : m_(num_elements),
      cfg_(cfg),
      noise_(noise),
      param_noise_rng_(RngStream(seed).derive(1)),
      action_noise_rng_(RngStream(seed).derive(2)),
      sample_rng_(RngStream(seed).derive(3)),
      actor_(MlpParams{}),
      critic_(MlpParams{}),
      target_actor_(MlpParams{}),
      target_critic_(MlpParams{}),
      perturbed_actor_(MlpParams{}),
      actor_adam_{},
      critic_adam_{},
      replay_(cfg.replay_capacity) {
  RngStream init_rng = RngStream(seed).derive(0);
  const ArchSpec actor_arch{{m_ + 1, cfg_.hidden1, cfg_.hidden2, m_},
                            OutputActivation::kScaledPhase};
  const ArchSpec critic_arch{{2 * m_ + 1, cfg_.hidden1, cfg_.hidden2, 1},
                             OutputActivation::kLinear};
  actor_ = MlpParams::init(actor_arch, init_rng);
  critic_ = MlpParams::init(critic_arch, init_rng);
  target_actor_ = actor_;
  target_critic_ = critic_;
  perturbed_actor_ = actor_;
  actor_adam_ = AdamState::make(actor_, cfg_.lr);
  critic_adam_ = AdamState::make(critic_, cfg_.lr);
}

void DdpgAgent::set_actor(MlpParams params) {
  actor_ = std::move(params);
  target_actor_ = actor_;
  perturbed_actor_ = actor_;
}

void DdpgAgent::resample_perturbed_actor() {
  perturbed_actor_ = perturb_params(actor_, noise_.sigma_k, param_noise_rng_);
}

Eigen::MatrixXd DdpgAgent::action_features(const Eigen::MatrixXd& theta) const {
  return (theta / kPi).array() - 1.0;
}

double DdpgAgent::normalized_reward(double reward_db) const {
  if (!cfg_.normalize_reward || reward_count_ < 2) return 0.0;
  const double var = reward_m2_ / static_cast<double>(reward_count_ - 1);
  const double stddev = std::max(std::sqrt(var), 1e-3);
  return (reward_db - reward_mean_) / stddev;
}

void DdpgAgent::observe_reward(double reward_db) {
  ++reward_count_;
  const double delta = reward_db - reward_mean_;
  reward_mean_ += delta / static_cast<double>(reward_count_);
  reward_m2_ += delta * (reward_db - reward_mean_);
}

PhaseConfig DdpgAgent::select_action(const Eigen::VectorXd& state) {
  Eigen::VectorXd theta = forward_one(perturbed_actor_, state);
  const double noise_rad = noise_.sigma_a * kPi;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    theta(j) += noise_rad * action_noise_rng_.gaussian();
    theta(j) = std::clamp(theta(j), 0.0, kTwoPi);
  }
  return PhaseConfig{std::move(theta)};
}

double DdpgAgent::critic_update(const std::vector<Transition>& batch) {
  if (batch.empty())
    throw std::invalid_argument("critic_update: empty batch");
  const int b = static_cast<int>(batch.size());
  const int state_dim = m_ + 1;

  Eigen::MatrixXd states(state_dim, b), next_states(state_dim, b);
  Eigen::MatrixXd actions(m_, b);
  Eigen::RowVectorXd rewards(b);
  for (int i = 0; i < b; ++i) {
    states.col(i) = batch[i].state;
    next_states.col(i) = batch[i].next_state;
    actions.col(i) = batch[i].action_theta;
    rewards(i) = cfg_.normalize_reward ? normalized_reward(batch[i].reward_db)
                                       : batch[i].reward_db;
  }

  // Bootstrapped target from the target networks. Horizon truncation is a
  // time limit, not a terminal state, so the target always bootstraps.
  const Eigen::MatrixXd next_actions = forward(target_actor_, next_states);
  Eigen::MatrixXd next_input(2 * m_ + 1, b);
  next_input.topRows(state_dim) = next_states;
  next_input.bottomRows(m_) = action_features(next_actions);
  const Eigen::RowVectorXd q_next = forward(target_critic_, next_input).row(0);
  const Eigen::RowVectorXd y = rewards + cfg_.gamma * q_next;

  Eigen::MatrixXd critic_input(2 * m_ + 1, b);
  critic_input.topRows(state_dim) = states;
  critic_input.bottomRows(m_) = action_features(actions);
  ForwardCache cache;
  const Eigen::RowVectorXd q = forward(critic_, critic_input, &cache).row(0);

  const Eigen::RowVectorXd diff = q - y;
  const double loss = 0.5 * diff.squaredNorm() / b;

  const Eigen::MatrixXd upstream = diff / static_cast<double>(b);
  const GradientBundle grads = backward(critic_, cache, upstream);
  adam_step(critic_, grads, critic_adam_, /*ascend=*/false);
  return loss;
}

double DdpgAgent::actor_update(const Eigen::MatrixXd& states) {
  const int b = static_cast<int>(states.cols());
  ForwardCache actor_cache;
  const Eigen::MatrixXd actions = forward(actor_, states, &actor_cache);

  Eigen::MatrixXd critic_input(2 * m_ + 1, b);
  critic_input.topRows(m_ + 1) = states;
  critic_input.bottomRows(m_) = action_features(actions);
  ForwardCache critic_cache;
  const Eigen::MatrixXd q = forward(critic_, critic_input, &critic_cache);

  const Eigen::MatrixXd ones =
      Eigen::MatrixXd::Constant(1, b, 1.0 / static_cast<double>(b));
  const GradientBundle critic_grads = backward(critic_, critic_cache, ones);
  // dQ/dtheta: the critic consumes theta/pi - 1.
  const Eigen::MatrixXd dtheta =
      critic_grads.input_grad.bottomRows(m_) / kPi;

  const GradientBundle actor_grads = backward(actor_, actor_cache, dtheta);
  adam_step(actor_, actor_grads, actor_adam_, /*ascend=*/true);
  return q.mean();
}

void DdpgAgent::adapt_noise(const Eigen::MatrixXd& probe_states) {
  if (probe_states.cols() == 0)
    throw std::invalid_argument("adapt_noise: empty probe batch");
  const MlpParams probe =
      perturb_params(actor_, noise_.sigma_k, param_noise_rng_);
  const Eigen::MatrixXd mu = forward(actor_, probe_states);
  const Eigen::MatrixXd mu_bar = forward(probe, probe_states);
  // Mean over states of the RMS action gap, in radians.
  const Eigen::ArrayXd per_state =
      ((mu - mu_bar).array().square().colwise().sum() /
       static_cast<double>(m_))
          .sqrt();
  const double d_k = per_state.mean();
  if (d_k <= noise_.delta)
    noise_.sigma_k *= noise_.alpha_adapt;
  else
    noise_.sigma_k /= noise_.alpha_adapt;
  noise_.sigma_k = std::clamp(noise_.sigma_k, kSigmaMin, kSigmaMax);
}

TrainingCurve DdpgAgent::train(EnvInterface& env) {
  TrainingCurve curve;
  Eigen::VectorXd state = env.reset();
  resample_perturbed_actor();

  double episode_reward_sum = 0.0;
  int episode_steps = 0;
  int episode_index = 0;

  for (long t = 1; t <= cfg_.total_env_steps; ++t) {
    const PhaseConfig action = select_action(state);
    const StepResult result = env.step(action);

    replay_.push(Transition{state, action.theta, result.reward_db,
                            result.state, result.truncated});
    observe_reward(result.reward_db);
    episode_reward_sum += result.reward_db;
    ++episode_steps;

    if (result.truncated) {
      curve.episodes.push_back(EpisodeStat{
          ++episode_index, t, episode_reward_sum / episode_steps,
          noise_.sigma_k});
      episode_reward_sum = 0.0;
      episode_steps = 0;
      state = env.reset();
      resample_perturbed_actor();
    } else {
      state = result.state;
    }

    if (t % cfg_.t_train == 0) {
      if (replay_.size() < static_cast<std::size_t>(cfg_.batch_size)) {
        ++curve.skipped_phases;
        continue;
      }
      for (int i = 0; i < cfg_.n_train; ++i) {
        const auto idx = replay_.sample_indices(cfg_.batch_size, sample_rng_);
        std::vector<Transition> batch;
        batch.reserve(idx.size());
        Eigen::MatrixXd batch_states(m_ + 1, cfg_.batch_size);
        for (int k = 0; k < cfg_.batch_size; ++k) {
          batch.push_back(replay_.at(idx[k]));
          batch_states.col(k) = batch.back().state;
        }
        critic_update(batch);
        actor_update(batch_states);
        polyak_update(target_critic_, critic_, cfg_.tau);
        polyak_update(target_actor_, actor_, cfg_.tau);
        ++train_steps_;
        if (i % cfg_.t_adapt == 0) adapt_noise(batch_states);
      }
    }
  }
  return curve;
}

PhaseConfig greedy_phases_from(const MlpParams& actor, EnvInterface& env,
                               const Eigen::VectorXd& initial_state, int steps,
                               double* best_reward) {
  Eigen::VectorXd state = initial_state;
  PhaseConfig best_action;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < steps; ++k) {
    PhaseConfig action{forward_one(actor, state)};
    const StepResult result = env.step(action);
    if (result.reward_db > best) {
      best = result.reward_db;
      best_action = action;
    }
    state = result.state;
  }
  if (best_reward) *best_reward = best;
  return best_action;
}

PhaseConfig greedy_phases(const MlpParams& actor, EnvInterface& env, int steps,
                          double* best_reward) {
  return greedy_phases_from(actor, env, env.reset(), steps, best_reward);
}

void DdpgAgent::save(const std::string& path) const {
  save_checkpoint(path, actor_, train_steps_);
}

MlpParams DdpgAgent::load_actor(const std::string& path) {
  return load_checkpoint(path);
}

void write_training_curve(const std::string& path, const TrainingCurve& curve) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("write_training_curve: cannot open " + path);
  out << "episode,env_steps,mean_reward_db,sigma_k\n";
  char line[128];
  for (const auto& ep : curve.episodes) {
    std::snprintf(line, sizeof(line), "%d,%ld,%.10g,%.10g\n", ep.episode,
                  ep.env_steps, ep.mean_reward_db, ep.sigma_k);
    out << line;
  }
}

}  // namespace irsopt
