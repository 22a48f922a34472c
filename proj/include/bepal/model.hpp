#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bepal/env.hpp"
#include "bepal/nn.hpp"
#include "bepal/rng.hpp"

namespace bepal::model {

using num::Tensor;

inline constexpr std::size_t kNumGateActions = 2;

struct ModelDims {
  std::size_t n_agents = 3;
  std::size_t feature_dim = env::kFeatureDim;
  std::size_t gat_heads = 3;
  std::size_t gat_head_dim = 32;
  std::size_t hidden = 128;
  std::size_t key_dim = 16;
  std::size_t motion_hidden = 64;
  double leaky_slope = nn::kDefaultLeakySlope;

  std::size_t motion_rows() const { return n_agents + 1; }
  std::size_t motion_width() const { return motion_rows() * env::kMotionFeatures; }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// One parameter set shared by every agent.
struct BepalParams {
  ModelDims dims;
  nn::GatLayer gat1;
  nn::GatLayer gat2;
  nn::Linear post_gat;
  nn::Linear msg_query;
  nn::Linear msg_key;
  nn::Linear msg_value;
  nn::LstmCell lstm;
  nn::Linear actor_move;
  nn::Linear actor_gate;
  nn::Linear critic;
  nn::Linear reward_head;
  nn::Linear motion_hidden;
  nn::Linear motion_out;

  static BepalParams create(const ModelDims& dims, nn::ParamInit& init);

  /// Stable names in a fixed order; the checkpoint keys.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
};

/// Per-agent beliefs, one row per predicting agent.
struct Beliefs {
  Tensor reward;  // (B, N): predicted return-to-go of every agent
  Tensor motion;  // (B, (N+1)*4): flattened (N+1) x 4 motion matrix per row
};

/// Recurrent state of the whole team, one row per agent.
struct TeamState {
  Tensor hidden;  // (N, H)
  Tensor cell;    // (N, H)
  Tensor inbox;   // (N, H): messages emitted at the previous step
  std::vector<std::size_t> gates;

  static TeamState initial(const ModelDims& dims);
};

struct ActionChoice {
  std::vector<std::size_t> moves;
  std::vector<std::size_t> gates;
};

/// Chooses actions from per-agent movement and gate probabilities,
/// given as (N, 5) and (N, 2) value spans.
using ActionPolicy = std::function<ActionChoice(const Tensor& move_probs, const Tensor& gate_probs)>;

ActionPolicy sampling_policy(Rng& rng);
ActionPolicy greedy_policy();
/// Replays scripted choices, one entry per call.
ActionPolicy scripted_policy(std::vector<ActionChoice> script);

Tensor encode_observation(const BepalParams& params, std::span<const ObservationGraph> graphs);
Tensor aggregate_messages(const BepalParams& params, const Tensor& hidden, const Tensor& inbox);
Beliefs decode_beliefs(const BepalParams& params, const Tensor& hidden);

struct StepOutput {
  ActionChoice actions;
  Tensor move_logp;   // (N, 5)
  Tensor move_probs;  // (N, 5)
  Tensor gate_logp;   // (N, 2)
  Tensor gate_probs;  // (N, 2)
  Tensor value;       // (N)
  std::optional<Beliefs> beliefs;
  TeamState next;
};

/// One decision tick for every agent: encode, fuse messages, LSTM update,
/// then policy, gate, value and (optionally) beliefs from the new hidden
/// state. The next inbox holds h' masked by each agent's gate.
StepOutput step_team(const BepalParams& params, const TeamState& state, std::span<const ObservationGraph> graphs,
                     const ActionPolicy& policy, bool decode);

/// Row `row` of a flattened motion tensor as an (N+1) x 4 matrix.
std::vector<std::vector<double>> motion_matrix(const Tensor& motion, std::size_t row, std::size_t n_agents);

}  // namespace bepal::model
