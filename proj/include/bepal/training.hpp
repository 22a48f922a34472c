#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bepal/env.hpp"
#include "bepal/model.hpp"
#include "bepal/rmsprop.hpp"
#include "bepal/rng.hpp"

namespace bepal::train {

using num::Tensor;

struct TrainConfig {
  double gamma = 1.0;
  double critic_weight = 0.05;
  double motion_weight = 0.05 / 3;  // 0.05 / N
  double reward_weight = 0.5;
  double entropy_coef = 0.01;
  double learning_rate = 1e-3;
  double smoothing = 0.97;
  double rms_epsilon = 1e-8;
  double max_grad_norm = 0.0;  // <= 0 disables clipping
  int episodes_per_epoch = 16;
  int updates_per_epoch = 1;  // RMSprop steps per epoch, each over an equal share of the episodes
  int epochs = 300;
  std::uint64_t seed = 1;
  bool no_motion = false;
  bool no_reward = false;
  bool no_aux = false;

  /// Defaults with the motion weight scaled to the team size.
  static TrainConfig defaults_for(int n_agents);

  bool uses_motion_loss() const { return !no_aux && !no_motion; }
  bool uses_reward_loss() const { return !no_aux && !no_reward; }
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything recorded for one tick of one episode. Tensors stay attached
/// to the tape active during the rollout.
struct StepRecord {
  model::ActionChoice actions;
  Tensor move_logp;  // (N) log-prob of the chosen movement
  Tensor gate_logp;  // (N) log-prob of the chosen gate
  Tensor value;      // (N)
  Tensor entropy;    // (N) movement + gate entropy
  std::optional<model::Beliefs> beliefs;
  std::vector<double> rewards;
};

struct EpisodeBatch {
  std::vector<StepRecord> steps;
  std::vector<env::GridState> states;  // states[0..T], states[t+1] follows steps[t]
  std::uint64_t seed = 0;
  std::uint64_t layout_id = 0;
  std::size_t n_agents = 0;

  std::size_t length() const { return steps.size(); }
  bool completed() const { return states.back().all_reached(); }
  /// rewards of agent i over the episode
  std::vector<double> rewards_of(std::size_t agent) const;
};

/// Plays one episode from env.reset(env_seed) with every agent acting
/// through the shared parameters.
EpisodeBatch rollout_episode(const model::BepalParams& params, env::PredatorPrey& env, std::uint64_t env_seed,
                             const model::ActionPolicy& policy, bool decode_beliefs = true);

/// R_t = sum_{k >= t} gamma^(k-t) r_k
std::vector<double> compute_returns(std::span<const double> rewards, double gamma);

/// Shared ground truth built after the episode: motion[t] is
/// ground_truth(states[t], states[t+1]); reward[t][j] is agent j's
/// return-to-go at t.
struct Targets {
  std::vector<std::vector<double>> motion;
  std::vector<std::vector<double>> reward;
};
Targets build_targets(const env::EnvConfig& config, const EpisodeBatch& batch, double gamma);

/// Per-agent-averaged loss terms. total = actor + critic_weight*critic +
/// motion_weight*aux_motion + reward_weight*aux_reward - entropy_coef*entropy,
/// evaluated as rl + aux with rl = actor + critic_weight*critic -
/// entropy_coef*entropy. Ablated aux terms are exactly zero.
struct LossBreakdown {
  double actor = 0.0;
  double critic = 0.0;
  double aux_motion = 0.0;
  double aux_reward = 0.0;
  double entropy = 0.0;
  double rl = 0.0;
  double total = 0.0;
};

struct LossOptions {
  /// Restrict every term to one agent's contributions (still divided by N).
  std::optional<std::size_t> only_agent;
  /// Advantages [t][i] used instead of the batch's own TD errors.
  const std::vector<std::vector<double>>* fixed_advantages = nullptr;
};

struct EpisodeLoss {
  Tensor total;  // scalar; undefined for zero-length episodes
  LossBreakdown terms;
  // Diagnostic belief errors, averaged over steps and agents (always computed).
  double motion_mse = 0.0;
  double reward_mse = 0.0;
};

/// TD advantages r_t + gamma V_{t+1} - V_t with V_T = 0, as plain numbers.
std::vector<std::vector<double>> td_advantages(const EpisodeBatch& batch, double gamma);

EpisodeLoss compute_losses(const EpisodeBatch& batch, const Targets& targets, const TrainConfig& config,
                           const LossOptions& options = {});

struct EpochMetrics {
  int epoch = 0;
  double avg_steps = 0.0;
  double completion_rate = 0.0;
  double avg_return = 0.0;
  double actor = 0.0;
  double critic = 0.0;
  double aux_motion = 0.0;
  double aux_reward = 0.0;
  double entropy = 0.0;
  double total = 0.0;
  double motion_mse = 0.0;
  double reward_mse = 0.0;
  double grad_norm = 0.0;
  friend bool operator==(const EpochMetrics&, const EpochMetrics&) = default;
};

model::ModelDims dims_for(const env::EnvConfig& config);

struct TrainerState {
  model::BepalParams params;
  num::RmspropState optimizer;
  Rng rng;
  int epoch = 0;  // completed epochs

  static TrainerState fresh(const env::EnvConfig& env_config, const TrainConfig& config);
};

/// Collects episodes_per_epoch episodes in order, summing their loss
/// gradients into the shared parameters; after every
/// episodes_per_epoch / updates_per_epoch episodes one RMSprop step is
/// applied. grad_norm reports the mean pre-clip norm over those steps.
EpochMetrics train_epoch(TrainerState& state, const env::EnvConfig& env_config, const TrainConfig& config);

}  // namespace bepal::train
