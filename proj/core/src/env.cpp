#include "irsopt/env.hpp"

#include <stdexcept>

#include "irsopt/optim.hpp"

namespace irsopt {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSnrFeatureScale = 40.0;
}  // namespace

Eigen::VectorXd encode_state(double snr_db_value, const PhaseConfig& action) {
  Eigen::VectorXd s(action.theta.size() + 1);
  s(0) = snr_db_value / kSnrFeatureScale;
  s.tail(action.theta.size()) = action.theta / kPi;
  s.tail(action.theta.size()).array() -= 1.0;
  return s;
}

PhaseConfig decode_action_features(const Eigen::VectorXd& state) {
  Eigen::VectorXd theta = state.tail(state.size() - 1);
  theta.array() += 1.0;
  theta *= kPi;
  return PhaseConfig{std::move(theta)};
}

IrsEnv::IrsEnv(EnvConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
  if (cfg_.horizon < 1)
    throw std::invalid_argument("IrsEnv: horizon must be >= 1");
}

double IrsEnv::reward_for(const PhaseConfig& action) const {
  const Eigen::VectorXcd h = effective_channel(channels_, action);
  const Beamformer f = mrt(h, cfg_.sys.p_max);
  return snr_db(h, f, cfg_.sys.sigma2_n);
}

Eigen::VectorXd IrsEnv::reset() {
  channels_ = sample_channels(rng_, cfg_.fading, cfg_.geom);
  const PhaseConfig initial = random_phases(rng_, cfg_.fading.m());
  step_index_ = 0;
  episode_active_ = true;
  return encode_state(reward_for(initial), initial);
}

Eigen::VectorXd IrsEnv::reset_with(ChannelSet ch) {
  channels_ = std::move(ch);
  const PhaseConfig initial = random_phases(rng_, cfg_.fading.m());
  step_index_ = 0;
  episode_active_ = true;
  return encode_state(reward_for(initial), initial);
}

StepResult IrsEnv::step(const PhaseConfig& action) {
  if (!episode_active_) throw std::logic_error("IrsEnv::step: call reset first");
  if (action.size() != cfg_.fading.m())
    throw std::invalid_argument("IrsEnv::step: action width mismatch");

  const double reward = reward_for(action);
  ++step_index_;
  const bool truncated = step_index_ >= cfg_.horizon;
  if (truncated) episode_active_ = false;
  return StepResult{encode_state(reward, action), reward, truncated};
}

const ChannelSet& IrsEnv::channels() const {
  if (!episode_active_ && step_index_ == 0)
    throw std::logic_error("IrsEnv::channels: no active episode");
  return channels_;
}

}  // namespace irsopt
