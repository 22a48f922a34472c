#include "bepal/model.hpp"

#include <stdexcept>

#include "bepal/error.hpp"
#include "bepal/ops.hpp"

namespace bepal::model {

BepalParams BepalParams::create(const ModelDims& d, nn::ParamInit& init) {
  if (d.n_agents == 0 || d.hidden == 0 || d.key_dim == 0) throw ConfigError("ModelDims: dimensions must be positive");
  BepalParams p;
  p.dims = d;
  p.gat1 = nn::GatLayer::create(d.feature_dim, d.gat_head_dim, d.gat_heads, nn::HeadMerge::Concat, d.leaky_slope, init);
  p.gat2 = nn::GatLayer::create(p.gat1.out_features(), d.hidden, 1, nn::HeadMerge::Single, d.leaky_slope, init);
  p.post_gat = nn::Linear::create(d.hidden, d.hidden, true, init);
  p.msg_query = nn::Linear::create(d.hidden, d.key_dim, false, init);
  p.msg_key = nn::Linear::create(d.hidden, d.key_dim, false, init);
  p.msg_value = nn::Linear::create(d.hidden, d.hidden, false, init);
  p.lstm = nn::LstmCell::create(d.hidden, init);
  p.actor_move = nn::Linear::create(d.hidden, env::kNumMoves, true, init);
  p.actor_gate = nn::Linear::create(d.hidden, kNumGateActions, true, init);
  p.critic = nn::Linear::create(d.hidden, 1, true, init);
  p.reward_head = nn::Linear::create(d.hidden, d.n_agents, true, init);
  p.motion_hidden = nn::Linear::create(d.hidden, d.motion_hidden, true, init);
  p.motion_out = nn::Linear::create(d.motion_hidden, d.motion_width(), true, init);
  return p;
}

std::vector<std::pair<std::string, Tensor>> BepalParams::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  auto gat = [&](const std::string& prefix, const nn::GatLayer& layer) {
    for (std::size_t h = 0; h < layer.heads.size(); ++h) {
      out.emplace_back(prefix + ".head" + std::to_string(h) + ".weight", layer.heads[h].weight);
      out.emplace_back(prefix + ".head" + std::to_string(h) + ".attn", layer.heads[h].attn);
    }
  };
  auto lin = [&](const std::string& prefix, const nn::Linear& l) {
    out.emplace_back(prefix + ".weight", l.weight);
    if (l.has_bias()) out.emplace_back(prefix + ".bias", l.bias);
  };
  gat("gat1", gat1);
  gat("gat2", gat2);
  lin("post_gat", post_gat);
  lin("msg_query", msg_query);
  lin("msg_key", msg_key);
  lin("msg_value", msg_value);
  lin("lstm.gates", lstm.gates);
  lin("actor_move", actor_move);
  lin("actor_gate", actor_gate);
  lin("critic", critic);
  lin("reward_head", reward_head);
  lin("motion_hidden", motion_hidden);
  lin("motion_out", motion_out);
  return out;
}

std::vector<Tensor> BepalParams::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::size_t BepalParams::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

TeamState TeamState::initial(const ModelDims& d) {
  TeamState s;
  s.hidden = Tensor::zeros({d.n_agents, d.hidden});
  s.cell = Tensor::zeros({d.n_agents, d.hidden});
  s.inbox = Tensor::zeros({d.n_agents, d.hidden});
  s.gates.assign(d.n_agents, 0);
  return s;
}

namespace {

std::size_t sample_row(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    acc += probs[k];
    if (u < acc) return k;
  }
  return probs.size() - 1;
}

std::size_t argmax_row(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  return best;
}

template <typename Pick>
std::vector<std::size_t> per_row(const Tensor& probs, Pick pick) {
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  std::vector<std::size_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = pick(probs.values().subspan(r * cols, cols));
  return out;
}

}  // namespace

ActionPolicy sampling_policy(Rng& rng) {
  return [&rng](const Tensor& move_probs, const Tensor& gate_probs) {
    ActionChoice c;
    // Movement then gate for each agent, agents in index order.
    const std::size_t n = move_probs.dim(0);
    c.moves.resize(n);
    c.gates.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      c.moves[i] = sample_row(move_probs.values().subspan(i * env::kNumMoves, env::kNumMoves), rng.uniform());
      c.gates[i] = sample_row(gate_probs.values().subspan(i * kNumGateActions, kNumGateActions), rng.uniform());
    }
    return c;
  };
}

ActionPolicy greedy_policy() {
  return [](const Tensor& move_probs, const Tensor& gate_probs) {
    return ActionChoice{per_row(move_probs, argmax_row), per_row(gate_probs, argmax_row)};
  };
}

ActionPolicy scripted_policy(std::vector<ActionChoice> script) {
  auto cursor = std::make_shared<std::size_t>(0);
  return [script = std::move(script), cursor](const Tensor&, const Tensor&) {
    if (*cursor >= script.size()) throw std::out_of_range("scripted_policy: script exhausted");
    return script[(*cursor)++];
  };
}

Tensor encode_observation(const BepalParams& params, std::span<const ObservationGraph> graphs) {
  nn::GraphBatch batch = nn::GraphBatch::from_graphs(graphs);
  nn::GraphBatch layer2{nn::gat_forward(params.gat1, batch), batch.offsets};
  const Tensor nodes = nn::gat_forward(params.gat2, layer2);
  const auto centers = batch.center_rows();
  return params.post_gat.forward(num::select_rows(nodes, centers));
}

Tensor aggregate_messages(const BepalParams& params, const Tensor& hidden, const Tensor& inbox) {
  if (inbox.ndim() != 2 || inbox.dim(0) != params.dims.n_agents)
    throw ShapeError("aggregate_messages: expected " + std::to_string(params.dims.n_agents) + " message slots, got " +
                     num::shape_str(inbox.shape()));
  return nn::message_attention(hidden, inbox, params.msg_query, params.msg_key, params.msg_value);
}

Beliefs decode_beliefs(const BepalParams& params, const Tensor& hidden) {
  Beliefs b;
  b.reward = params.reward_head.forward(hidden);
  b.motion = params.motion_out.forward(num::leaky_relu(params.motion_hidden.forward(hidden), params.dims.leaky_slope));
  return b;
}

StepOutput step_team(const BepalParams& params, const TeamState& state, std::span<const ObservationGraph> graphs,
                     const ActionPolicy& policy, bool decode) {
  const std::size_t n = params.dims.n_agents;
  if (graphs.size() != n) throw ShapeError("step_team: expected one observation per agent");
  const Tensor e = encode_observation(params, graphs);
  const Tensor c = aggregate_messages(params, state.hidden, state.inbox);
  auto [h_next, s_next] = params.lstm.step(num::add(e, c), state.hidden, state.cell);

  StepOutput out;
  const Tensor move_logits = params.actor_move.forward(h_next);
  const Tensor gate_logits = params.actor_gate.forward(h_next);
  out.move_logp = num::log_softmax(move_logits, 1);
  out.move_probs = num::softmax(move_logits, 1);
  out.gate_logp = num::log_softmax(gate_logits, 1);
  out.gate_probs = num::softmax(gate_logits, 1);
  out.value = num::reshape(params.critic.forward(h_next), {n});
  if (decode) out.beliefs = decode_beliefs(params, h_next);

  out.actions = policy(out.move_probs, out.gate_probs);
  if (out.actions.moves.size() != n || out.actions.gates.size() != n)
    throw std::logic_error("step_team: policy returned the wrong number of actions");

  std::vector<double> mask(n * params.dims.hidden, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (out.actions.gates[i] > 1) throw std::out_of_range("step_team: gate action out of range");
    if (out.actions.moves[i] >= env::kNumMoves) throw std::out_of_range("step_team: move action out of range");
    std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(i * params.dims.hidden), params.dims.hidden,
                static_cast<double>(out.actions.gates[i]));
  }
  out.next.inbox = num::mul(h_next, Tensor::from({n, params.dims.hidden}, std::move(mask)));
  out.next.hidden = std::move(h_next);
  out.next.cell = std::move(s_next);
  out.next.gates = out.actions.gates;
  return out;
}

std::vector<std::vector<double>> motion_matrix(const Tensor& motion, std::size_t row, std::size_t n_agents) {
  const std::size_t width = (n_agents + 1) * env::kMotionFeatures;
  if (motion.ndim() != 2 || motion.dim(1) != width) throw ShapeError("motion_matrix: unexpected motion tensor shape");
  std::vector<std::vector<double>> m(n_agents + 1, std::vector<double>(env::kMotionFeatures));
  for (std::size_t r = 0; r <= n_agents; ++r)
    for (std::size_t k = 0; k < env::kMotionFeatures; ++k)
      m[r][k] = motion.values()[row * width + r * env::kMotionFeatures + k];
  return m;
}

}  // namespace bepal::model
