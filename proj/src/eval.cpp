#include "bepal/eval.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <stdexcept>

#include "bepal/error.hpp"

namespace bepal::eval {

EvalReport summarize(std::vector<EpisodeSummary> episodes) {
  EvalReport r;
  r.n_episodes = episodes.size();
  if (episodes.empty()) throw std::invalid_argument("summarize: no episodes");
  const double n = static_cast<double>(episodes.size());
  double motion = 0.0, reward = 0.0;
  bool have_beliefs = true;
  for (const auto& e : episodes) {
    r.avg_steps += e.steps;
    r.completion_rate += e.completed ? 1.0 : 0.0;
    r.avg_return += e.avg_return;
    have_beliefs = have_beliefs && e.motion_mse && e.reward_mse;
    if (have_beliefs) {
      motion += *e.motion_mse;
      reward += *e.reward_mse;
    }
  }
  r.avg_steps /= n;
  r.completion_rate /= n;
  r.avg_return /= n;
  double var = 0.0;
  for (const auto& e : episodes) var += (e.steps - r.avg_steps) * (e.steps - r.avg_steps);
  r.std_steps = std::sqrt(var / n);
  if (have_beliefs) {
    r.motion_mse = motion / n;
    r.reward_mse = reward / n;
  }
  r.episodes = std::move(episodes);
  return r;
}

EvalReport evaluate(const model::BepalParams& params, const env::EnvConfig& config, std::size_t n_episodes,
                    std::uint64_t seed, const EvalOptions& options) {
  if (n_episodes == 0) throw std::invalid_argument("evaluate: n_episodes must be positive");
  if (static_cast<std::size_t>(config.n_agents) != params.dims.n_agents)
    throw ConfigError("evaluate: environment and model disagree on the number of agents");
  env::PredatorPrey env(config);
  std::vector<EpisodeSummary> out;
  for (std::size_t k = 0; k < n_episodes; ++k) {
    Rng rng(derive_seed(seed, k, 1));
    const auto policy = options.greedy ? model::greedy_policy() : model::sampling_policy(rng);
    EpisodeSummary s;
    s.env_seed = derive_seed(seed, k);
    const auto batch = train::rollout_episode(params, env, s.env_seed, policy, options.decode_beliefs);
    s.steps = static_cast<int>(batch.length());
    s.completed = batch.completed();
    double ret = 0.0;
    for (const auto& st : batch.steps)
      for (double r : st.rewards) ret += r;
    s.avg_return = ret / static_cast<double>(batch.n_agents);
    if (options.decode_beliefs) {
      train::TrainConfig tc;
      tc.gamma = options.gamma;
      const auto loss = train::compute_losses(batch, train::build_targets(config, batch, options.gamma), tc);
      s.motion_mse = loss.motion_mse;
      s.reward_mse = loss.reward_mse;
    }
    out.push_back(s);
  }
  return summarize(std::move(out));
}

EvalReport evaluate_random_policy(const env::EnvConfig& config, std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes == 0) throw std::invalid_argument("evaluate_random_policy: n_episodes must be positive");
  env::PredatorPrey env(config);
  std::vector<EpisodeSummary> out;
  std::vector<env::Move> moves(static_cast<std::size_t>(config.n_agents));
  for (std::size_t k = 0; k < n_episodes; ++k) {
    Rng rng(derive_seed(seed, k, 1));
    EpisodeSummary s;
    s.env_seed = derive_seed(seed, k);
    env.reset(s.env_seed);
    double ret = 0.0;
    while (!env.done()) {
      for (auto& m : moves) m = env::move_from_index(rng.below(env::kNumMoves));
      for (double r : env.step(moves).rewards) ret += r;
    }
    s.steps = env.state().step_count;
    s.completed = env.state().all_reached();
    s.avg_return = ret / config.n_agents;
    out.push_back(s);
  }
  return summarize(std::move(out));
}

EvalReport transfer_eval(const model::BepalParams& params, const env::EnvConfig& target, std::size_t n_episodes,
                         std::uint64_t seed, const EvalOptions& options) {
  if (static_cast<std::size_t>(target.n_agents) != params.dims.n_agents)
    throw ConfigError("transfer_eval: checkpoint was trained for " + std::to_string(params.dims.n_agents) +
                      " agents but the target map has " + std::to_string(target.n_agents) +
                      "; reward and motion heads are sized by team size");
  target.validate();
  return evaluate(params, target, n_episodes, seed, options);
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: series lengths differ");
  if (x.size() < 3) throw std::invalid_argument("pearson: at least 3 points required");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw std::domain_error("pearson: correlation undefined for a constant series");
  PearsonResult res;
  res.n = x.size();
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double dof = n - 2.0;
  if (dof <= 0.0 || std::abs(res.r) == 1.0) {
    res.p_value = dof <= 0.0 ? 1.0 : 0.0;
    return res;
  }
  const double t = res.r * std::sqrt(dof / (1.0 - res.r * res.r));
  boost::math::students_t dist(dof);
  res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return res;
}

CorrelationReport correlation_study(std::span<const train::EpochMetrics> history) {
  if (history.size() < 3) throw std::invalid_argument("correlation_study: at least 3 epochs required");
  std::vector<double> perf, motion, reward;
  for (const auto& m : history) {
    perf.push_back(-m.avg_steps);
    motion.push_back(-m.motion_mse);
    reward.push_back(-m.reward_mse);
  }
  CorrelationReport r;
  r.n_points = history.size();
  r.motion = pearson(motion, perf);
  r.reward = pearson(reward, perf);
  return r;
}

}  // namespace bepal::eval
