#include "bepal/training.hpp"

#include <cmath>
#include <sstream>

#include "bepal/error.hpp"
#include "bepal/ops.hpp"

namespace bepal::train {

TrainConfig TrainConfig::defaults_for(int n_agents) {
  TrainConfig c;
  c.motion_weight = 0.05 / n_agents;
  return c;
}

void TrainConfig::validate() const {
  if (gamma <= 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in (0, 1]");
  for (double w : {critic_weight, motion_weight, reward_weight, entropy_coef, learning_rate})
    if (w < 0.0) throw ConfigError("loss weights and learning rate must be non-negative");
  if (smoothing < 0.0 || smoothing >= 1.0) throw ConfigError("smoothing must lie in [0, 1)");
  if (rms_epsilon <= 0.0) throw ConfigError("rms_epsilon must be positive");
  if (episodes_per_epoch < 1) throw ConfigError("episodes_per_epoch must be at least 1");
  if (updates_per_epoch < 1 || episodes_per_epoch % updates_per_epoch != 0)
    throw ConfigError("updates_per_epoch must be positive and divide episodes_per_epoch");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
}

std::vector<double> EpisodeBatch::rewards_of(std::size_t agent) const {
  std::vector<double> r;
  r.reserve(steps.size());
  for (const auto& s : steps) r.push_back(s.rewards.at(agent));
  return r;
}

EpisodeBatch rollout_episode(const model::BepalParams& params, env::PredatorPrey& env, std::uint64_t env_seed,
                             const model::ActionPolicy& policy, bool decode_beliefs) {
  EpisodeBatch batch;
  batch.seed = env_seed;
  batch.n_agents = params.dims.n_agents;
  if (static_cast<std::size_t>(env.config().n_agents) != batch.n_agents)
    throw ConfigError("rollout_episode: environment and model disagree on the number of agents");
  auto graphs = env.reset(env_seed);
  batch.layout_id = env.state().episode_id;
  batch.states.push_back(env.state());

  model::TeamState team = model::TeamState::initial(params.dims);
  while (!env.done()) {
    auto out = model::step_team(params, team, graphs, policy, decode_beliefs);
    StepRecord rec;
    rec.actions = out.actions;
    rec.move_logp = num::pick(out.move_logp, out.actions.moves);
    rec.gate_logp = num::pick(out.gate_logp, out.actions.gates);
    rec.value = out.value;
    rec.entropy = num::scale(num::add(num::row_sum(num::mul(out.move_probs, out.move_logp)),
                                      num::row_sum(num::mul(out.gate_probs, out.gate_logp))),
                             -1.0);
    rec.beliefs = std::move(out.beliefs);

    std::vector<env::Move> moves;
    moves.reserve(out.actions.moves.size());
    for (auto m : out.actions.moves) moves.push_back(env::move_from_index(m));
    auto result = env.step(moves);
    rec.rewards = std::move(result.rewards);
    batch.steps.push_back(std::move(rec));
    batch.states.push_back(env.state());
    team = std::move(out.next);
    graphs = env.observe_all();
  }
  return batch;
}

std::vector<double> compute_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

Targets build_targets(const env::EnvConfig& config, const EpisodeBatch& batch, double gamma) {
  Targets t;
  const std::size_t T = batch.length();
  for (std::size_t s = 0; s < T; ++s) t.motion.push_back(env::ground_truth(config, batch.states[s], batch.states[s + 1]));
  t.reward.assign(T, std::vector<double>(batch.n_agents, 0.0));
  for (std::size_t j = 0; j < batch.n_agents; ++j) {
    const auto rewards = batch.rewards_of(j);
    const auto rtg = compute_returns(rewards, gamma);
    for (std::size_t s = 0; s < T; ++s) t.reward[s][j] = rtg[s];
  }
  return t;
}

std::vector<std::vector<double>> td_advantages(const EpisodeBatch& batch, double gamma) {
  const std::size_t T = batch.length(), n = batch.n_agents;
  std::vector<std::vector<double>> adv(T, std::vector<double>(n, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double next = t + 1 < T ? batch.steps[t + 1].value[i] : 0.0;
      adv[t][i] = batch.steps[t].rewards[i] + gamma * next - batch.steps[t].value[i];
    }
  }
  return adv;
}

namespace {

// Squared error of each predicting agent's row against a target shared by all rows: (N).
Tensor per_agent_sq_error(const Tensor& prediction, const std::vector<double>& target) {
  const std::size_t rows = prediction.dim(0), width = prediction.dim(1);
  if (target.size() != width) throw ShapeError("belief target width does not match prediction");
  std::vector<double> tiled;
  tiled.reserve(rows * width);
  for (std::size_t r = 0; r < rows; ++r) tiled.insert(tiled.end(), target.begin(), target.end());
  const Tensor diff = num::sub(prediction, Tensor::from({rows, width}, std::move(tiled)));
  return num::scale(num::row_sum(num::mul(diff, diff)), 1.0 / static_cast<double>(width));
}

}  // namespace

EpisodeLoss compute_losses(const EpisodeBatch& batch, const Targets& targets, const TrainConfig& config,
                           const LossOptions& options) {
  EpisodeLoss out;
  const std::size_t T = batch.length(), n = batch.n_agents;
  if (T == 0) return out;
  if (targets.motion.size() != T || targets.reward.size() != T)
    throw ShapeError("compute_losses: targets do not cover the episode");
  const auto adv = options.fixed_advantages != nullptr ? *options.fixed_advantages : td_advantages(batch, config.gamma);

  std::vector<double> mask_values(n, 1.0);
  if (options.only_agent) {
    if (*options.only_agent >= n) throw std::out_of_range("compute_losses: agent index out of range");
    std::fill(mask_values.begin(), mask_values.end(), 0.0);
    mask_values[*options.only_agent] = 1.0;
  }
  const Tensor mask = Tensor::from({n}, mask_values);
  const Tensor zeros = Tensor::zeros({n});

  std::vector<Tensor> actor_terms, critic_terms, entropy_terms, motion_terms, reward_terms;
  double motion_mse = 0.0, reward_mse = 0.0;
  std::size_t belief_count = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto& step = batch.steps[t];
    const Tensor& next_value = t + 1 < T ? batch.steps[t + 1].value : zeros;
    const Tensor td = num::sub(num::add(Tensor::from({n}, step.rewards), num::scale(next_value, config.gamma)), step.value);
    critic_terms.push_back(num::sum(num::mul(mask, num::mul(td, td))));

    std::vector<double> a(adv.at(t).begin(), adv.at(t).end());
    for (std::size_t i = 0; i < n; ++i) a[i] *= -mask_values[i];
    actor_terms.push_back(num::sum(num::mul(Tensor::from({n}, std::move(a)), num::add(step.move_logp, step.gate_logp))));
    entropy_terms.push_back(num::sum(num::mul(mask, step.entropy)));

    if (step.beliefs) {
      const Tensor motion_err = per_agent_sq_error(step.beliefs->motion, targets.motion[t]);
      const Tensor reward_err = per_agent_sq_error(step.beliefs->reward, targets.reward[t]);
      for (std::size_t i = 0; i < n; ++i) {
        if (mask_values[i] == 0.0) continue;
        motion_mse += motion_err[i];
        reward_mse += reward_err[i];
        ++belief_count;
      }
      if (config.uses_motion_loss()) motion_terms.push_back(num::sum(num::mul(mask, motion_err)));
      if (config.uses_reward_loss()) reward_terms.push_back(num::sum(num::mul(mask, reward_err)));
    }
  }
  if (belief_count > 0) {
    out.motion_mse = motion_mse / static_cast<double>(belief_count);
    out.reward_mse = reward_mse / static_cast<double>(belief_count);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  auto total_of = [&](const std::vector<Tensor>& parts) {
    return num::scale(num::sum(num::concat(parts, 0)), inv_n);
  };
  const Tensor actor = total_of(actor_terms);
  const Tensor critic = total_of(critic_terms);
  const Tensor entropy = total_of(entropy_terms);
  const Tensor rl = num::add(num::add(actor, num::scale(critic, config.critic_weight)),
                             num::scale(entropy, -config.entropy_coef));
  out.terms.actor = actor.item();
  out.terms.critic = critic.item();
  out.terms.entropy = entropy.item();
  out.terms.rl = rl.item();

  Tensor total = rl;
  if (!motion_terms.empty() || !reward_terms.empty()) {
    Tensor aux;
    if (!motion_terms.empty()) {
      const Tensor m = total_of(motion_terms);
      out.terms.aux_motion = m.item();
      aux = num::scale(m, config.motion_weight);
    }
    if (!reward_terms.empty()) {
      const Tensor r = total_of(reward_terms);
      out.terms.aux_reward = r.item();
      const Tensor weighted = num::scale(r, config.reward_weight);
      aux = aux.defined() ? num::add(aux, weighted) : weighted;
    }
    total = num::add(rl, aux);
  }
  out.terms.total = total.item();
  out.total = total;
  return out;
}

model::ModelDims dims_for(const env::EnvConfig& config) {
  model::ModelDims d;
  d.n_agents = static_cast<std::size_t>(config.n_agents);
  return d;
}

TrainerState TrainerState::fresh(const env::EnvConfig& env_config, const TrainConfig& config) {
  env_config.validate();
  config.validate();
  nn::ParamInit init(derive_seed(config.seed, 0x9A7A));
  TrainerState s{model::BepalParams::create(dims_for(env_config), init), {}, Rng(derive_seed(config.seed, 0x5EED)), 0};
  const auto params = s.params.parameters();
  s.optimizer = num::RmspropState::for_params(params, {config.learning_rate, config.smoothing, config.rms_epsilon});
  return s;
}

EpochMetrics train_epoch(TrainerState& state, const env::EnvConfig& env_config, const TrainConfig& config) {
  auto params = state.params.parameters();
  num::zero_grads(params);
  env::PredatorPrey env(env_config);
  EpochMetrics m;
  m.epoch = state.epoch + 1;
  const auto policy = model::sampling_policy(state.rng);
  const int E = config.episodes_per_epoch;
  const int per_update = E / config.updates_per_epoch;
  for (int e = 0; e < E; ++e) {
    const std::uint64_t env_seed = state.rng.next_u64();
    num::Tape tape;
    num::Tape::Scope scope(tape);
    const EpisodeBatch batch = rollout_episode(state.params, env, env_seed, policy, true);
    const Targets targets = build_targets(env_config, batch, config.gamma);
    EpisodeLoss loss;
    try {
      loss = compute_losses(batch, targets, config);
      if (loss.total.defined()) tape.backward(loss.total);
    } catch (const NumericError& err) {
      std::ostringstream os;
      os << "epoch " << m.epoch << ", episode " << e << " (env seed " << env_seed << ", length " << batch.length()
         << "): " << err.what();
      throw NumericError(os.str());
    }
    m.avg_steps += static_cast<double>(batch.length());
    m.completion_rate += batch.completed() ? 1.0 : 0.0;
    double ret = 0.0;
    for (const auto& s : batch.steps)
      for (double r : s.rewards) ret += r;
    m.avg_return += ret / static_cast<double>(batch.n_agents);
    m.actor += loss.terms.actor;
    m.critic += loss.terms.critic;
    m.aux_motion += loss.terms.aux_motion;
    m.aux_reward += loss.terms.aux_reward;
    m.entropy += loss.terms.entropy;
    m.total += loss.terms.total;
    m.motion_mse += loss.motion_mse;
    m.reward_mse += loss.reward_mse;

    if ((e + 1) % per_update == 0) {
      const double norm = num::grad_norm(params);
      m.grad_norm += norm;
      if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm)
        num::scale_grads(params, config.max_grad_norm / norm);
      num::rmsprop_step(params, state.optimizer);
      num::zero_grads(params);
    }
  }
  const double inv = 1.0 / E;
  for (double* f : {&m.avg_steps, &m.completion_rate, &m.avg_return, &m.actor, &m.critic, &m.aux_motion,
                    &m.aux_reward, &m.entropy, &m.total, &m.motion_mse, &m.reward_mse})
    *f *= inv;
  m.grad_norm /= config.updates_per_epoch;
  state.epoch = m.epoch;
  return m;
}

}  // namespace bepal::train
