#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "bepal/ops.hpp"
#include "bepal/training.hpp"
#include "oracles.hpp"

// A 2-agent, 3-step episode with scripted actions and a tiny model, small
// enough to finite-difference every parameter of the full loss.
namespace toy {

inline bepal::model::ModelDims dims(std::size_t n) {
  bepal::model::ModelDims d;
  d.n_agents = n;
  d.gat_heads = 2;
  d.gat_head_dim = 3;
  d.hidden = 6;
  d.key_dim = 2;
  d.motion_hidden = 4;
  return d;
}

inline bepal::env::EnvConfig env_config() {
  bepal::env::EnvConfig c;
  c.map_size = 5;
  c.n_agents = 2;
  c.n_obstacles = 2;
  c.max_steps = 3;
  return c;
}

inline const std::vector<bepal::model::ActionChoice>& script() {
  static const std::vector<bepal::model::ActionChoice> s{{{0, 3}, {1, 1}}, {{2, 4}, {0, 1}}, {{3, 1}, {1, 0}}};
  return s;
}

/// First layout seed whose scripted episode runs all three steps.
inline std::uint64_t full_length_seed(const bepal::model::BepalParams& p) {
  bepal::env::PredatorPrey e(env_config());
  for (std::uint64_t s = 0;; ++s)
    if (bepal::train::rollout_episode(p, e, s, bepal::model::scripted_policy(script()), true).length() == 3) return s;
}

/// Worst relative error between tape gradients of the total loss and
/// central differences, over every parameter entry. Advantages are frozen
/// at their initial values so the loss is a smooth function of parameters.
inline double end_to_end_gradient_error(std::uint64_t init_seed, double gamma) {
  namespace b = bepal;
  b::nn::ParamInit init(init_seed);
  const auto p = b::model::BepalParams::create(dims(2), init);
  const auto c = env_config();
  const std::uint64_t seed = full_length_seed(p);
  b::env::PredatorPrey e(c);
  auto cfg = b::train::TrainConfig::defaults_for(2);
  cfg.gamma = gamma;
  const auto adv =
      b::train::td_advantages(b::train::rollout_episode(p, e, seed, b::model::scripted_policy(script()), true), gamma);
  b::train::LossOptions opt;
  opt.fixed_advantages = &adv;
  auto loss = [&]() {
    const auto batch = b::train::rollout_episode(p, e, seed, b::model::scripted_policy(script()), true);
    return b::train::compute_losses(batch, b::train::build_targets(c, batch, gamma), cfg, opt);
  };
  auto params = p.parameters();
  b::num::zero_grads(params);
  {
    b::num::Tape tape;
    b::num::Tape::Scope scope(tape);
    tape.backward(loss().total);
  }
  double worst = 0.0;
  for (b::num::Tensor w : params) {
    std::vector<double> analytic(w.numel(), 0.0);
    if (w.has_grad()) analytic.assign(w.grad().begin(), w.grad().end());
    std::vector<double> x(w.values().begin(), w.values().end());
    const auto numeric = oracle::finite_difference(
        [&](const oracle::Vec& xv) {
          std::copy(xv.begin(), xv.end(), w.mutable_values().begin());
          return loss().terms.total;
        },
        x);
    std::copy(x.begin(), x.end(), w.mutable_values().begin());
    worst = std::max(worst, oracle::max_rel_error(analytic, numeric));
  }
  return worst;
}

}  // namespace toy
