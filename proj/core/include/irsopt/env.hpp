#pragma once

#include <Eigen/Dense>

#include "irsopt/channel.hpp"
#include "irsopt/system.hpp"

namespace irsopt {

struct EnvConfig {
  FadingParams fading;
  LinkGeometry geom;
  SystemParams sys = SystemParams::from_dbm(5.0, -80.0);
  int horizon = 1000;
  std::uint64_t seed = 0;
};

struct StepResult {
  Eigen::VectorXd state;
  double reward_db = 0.0;
  bool truncated = false;
};

// State feature layout: [snr_db/40, theta/pi - 1 ...], width M+1.
Eigen::VectorXd encode_state(double snr_db_value, const PhaseConfig& action);
PhaseConfig decode_action_features(const Eigen::VectorXd& state);

// Agent-facing surface: SNR-and-action observations only, no CSI.
class EnvInterface {
 public:
  virtual ~EnvInterface() = default;
  virtual Eigen::VectorXd reset() = 0;
  virtual StepResult step(const PhaseConfig& action) = 0;
  virtual int num_elements() const = 0;
  virtual int horizon() const = 0;
};

// Episodic MDP: quasi-static channels drawn at reset, reward is the MRT
// SNR in dB of the submitted phases.
class IrsEnv final : public EnvInterface {
 public:
  explicit IrsEnv(EnvConfig cfg);

  Eigen::VectorXd reset() override;
  StepResult step(const PhaseConfig& action) override;
  int num_elements() const override { return cfg_.fading.m(); }
  int horizon() const override { return cfg_.horizon; }

  // Harness-only CSI access; never reachable through EnvInterface.
  const ChannelSet& channels() const;
  // Harness injection of a known realization (paired trials).
  Eigen::VectorXd reset_with(ChannelSet ch);

  const EnvConfig& config() const { return cfg_; }

 private:
  double reward_for(const PhaseConfig& action) const;

  EnvConfig cfg_;
  RngStream rng_;
  ChannelSet channels_;
  int step_index_ = 0;
  bool episode_active_ = false;
};

}  // namespace irsopt
