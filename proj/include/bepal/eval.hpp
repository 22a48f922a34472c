#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bepal/env.hpp"
#include "bepal/model.hpp"
#include "bepal/training.hpp"

namespace bepal::eval {

struct EvalOptions {
  bool decode_beliefs = false;  // also score the belief decoder
  bool greedy = false;          // argmax actions instead of sampling
  double gamma = 1.0;           // for reward-belief targets
};

struct EpisodeSummary {
  std::uint64_t env_seed = 0;
  int steps = 0;  // capped failures count as max_steps
  bool completed = false;
  double avg_return = 0.0;
  std::optional<double> motion_mse;
  std::optional<double> reward_mse;
};

struct EvalReport {
  std::size_t n_episodes = 0;
  double avg_steps = 0.0;
  double std_steps = 0.0;  // population std across episodes
  double completion_rate = 0.0;
  double avg_return = 0.0;
  std::optional<double> motion_mse;
  std::optional<double> reward_mse;
  std::vector<EpisodeSummary> episodes;
};

/// Aggregates per-episode summaries into a report.
EvalReport summarize(std::vector<EpisodeSummary> episodes);

/// Plays n_episodes with the learned policy and no parameter updates.
/// Episode k uses layout seed derive_seed(seed, k) so runs over the same
/// seed see the same layouts as evaluate_random_policy.
EvalReport evaluate(const model::BepalParams& params, const env::EnvConfig& config, std::size_t n_episodes,
                    std::uint64_t seed, const EvalOptions& options = {});

/// Uniform random movement for every agent; the random-policy baseline.
EvalReport evaluate_random_policy(const env::EnvConfig& config, std::size_t n_episodes, std::uint64_t seed);

/// Evaluates trained parameters on another map; the team size must match.
EvalReport transfer_eval(const model::BepalParams& params, const env::EnvConfig& target, std::size_t n_episodes,
                         std::uint64_t seed, const EvalOptions& options = {});

struct PearsonResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided, Student t with n-2 dof
  std::size_t n = 0;
};

PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationReport {
  PearsonResult motion;  // pearson(-motion_mse, -avg_steps)
  PearsonResult reward;  // pearson(-reward_mse, -avg_steps)
  std::size_t n_points = 0;
};

/// Accuracy (negated belief MSE) against performance (negated avg_steps)
/// across training epochs.
CorrelationReport correlation_study(std::span<const train::EpochMetrics> history);

}  // namespace bepal::eval
