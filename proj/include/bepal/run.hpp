#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bepal/checkpoint.hpp"
#include "bepal/env.hpp"
#include "bepal/eval.hpp"
#include "bepal/training.hpp"

namespace bepal::run {

using json = nlohmann::json;

/// Version string written into every run directory and checkpoint.
const char* code_version();

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Reads BEPAL_LOG_LEVEL (error|warn|info|debug, default info).
LogLevel log_level_from_env();
void set_log_level(LogLevel level);
LogLevel log_level();
void log(LogLevel level, const std::string& message);

struct RunConfig {
  std::string name = "run";
  std::string out_dir = "runs";
  int checkpoint_every = 50;  // epochs; the final epoch is always saved
  env::EnvConfig env;
  train::TrainConfig train;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

json to_json(const env::EnvConfig& c);
json to_json(const train::TrainConfig& c);
json to_json(const RunConfig& c);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
/// The motion weight defaults to 0.05 / n_agents when not given.
env::EnvConfig env_config_from_json(const json& j);
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& c);

/// Command-line overrides; unset fields leave the file's values alone.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> episodes_per_epoch;
  std::optional<std::string> out_dir;
  bool no_motion = false;
  bool no_reward = false;
  bool no_aux = false;
};
void apply(RunConfig& c, const Overrides& o);

/// <out_dir>/<name>-s<seed>
std::string run_dir(const RunConfig& c);

// -- metrics log ------------------------------------------------------------

/// epoch,avg_steps,completion_rate,avg_return,actor,critic,aux_motion,
/// aux_reward,entropy,total,motion_mse,reward_mse,grad_norm
const std::string& metrics_header();
std::string format_metrics_row(const train::EpochMetrics& m);
train::EpochMetrics parse_metrics_row(const std::string& line);
std::vector<train::EpochMetrics> read_metrics_log(const std::string& path);

// -- checkpoints ------------------------------------------------------------

io::Checkpoint make_checkpoint(const RunConfig& c, const train::TrainerState& state);
struct LoadedRun {
  RunConfig config;
  train::TrainerState state;
};
LoadedRun load_run_checkpoint(const std::string& path);
/// Path of the highest-epoch checkpoint in a run directory, if any.
std::optional<std::string> latest_checkpoint(const std::string& dir);
std::string checkpoint_path(const std::string& dir, int epoch);

// -- commands ---------------------------------------------------------------

struct TrainResult {
  std::string dir;
  std::vector<train::EpochMetrics> history;  // all epochs, including resumed ones
  train::TrainerState state;
};

/// Trains into run_dir(c): config.json, VERSION, metrics.csv, timing.csv and
/// checkpoints/. With resume the latest checkpoint is loaded, log rows past
/// its epoch are dropped and training continues up to c.train.epochs.
TrainResult cmd_train(const RunConfig& c, bool resume = false);

struct EvalRequest {
  std::size_t n_episodes = 200;
  std::uint64_t seed = 12345;
  eval::EvalOptions options;
};

json report_to_json(const eval::EvalReport& r);

/// Evaluates a checkpoint on its own environment, or on `env_override`.
eval::EvalReport cmd_eval(const std::string& checkpoint, const std::optional<env::EnvConfig>& env_override,
                          const EvalRequest& request, const std::optional<std::string>& report_path = {});

struct TransferReport {
  eval::EvalReport model;
  eval::EvalReport random;  // random-policy oracle on the same target layouts
};
TransferReport cmd_transfer(const std::string& checkpoint, const env::EnvConfig& target, const EvalRequest& request,
                            const std::optional<std::string>& report_path = {});

eval::EvalReport cmd_baseline_random(const env::EnvConfig& config, const EvalRequest& request,
                                     const std::optional<std::string>& report_path = {});

struct AblationRow {
  std::string variant;
  std::vector<double> final_steps;  // per seed: mean avg_steps over the last `tail` epochs
  double mean_steps = 0.0;
  double std_steps = 0.0;  // population std across seeds
  double mean_completion = 0.0;
};

inline constexpr const char* kAblationVariants[4] = {"BEPAL", "BEPAL w/o Reward Prediction",
                                                     "BEPAL w/o Motion Prediction", "BEPAL w/o Auxiliary Learning"};

/// Mean avg_steps (and completion) over the last `tail` epochs of a history.
double tail_mean_steps(const std::vector<train::EpochMetrics>& h, std::size_t tail);
double tail_mean_completion(const std::vector<train::EpochMetrics>& h, std::size_t tail);

/// Trains the four variants over `seeds` with identical budgets; each run
/// lands in <out_dir>/<name>-<variant tag>-s<seed>. Writes <name>-ablation.csv
/// into out_dir.
std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                                    std::size_t tail = 20, bool resume = false);

/// One JSON object per step per agent; returns the number of records.
std::size_t cmd_export_beliefs(const std::string& checkpoint, const std::optional<env::EnvConfig>& env_override,
                               const EvalRequest& request, const std::string& out_path);

/// Fields of one exported record, positions in grid units.
struct BeliefRecord {
  std::size_t episode = 0;
  std::size_t step = 0;
  std::size_t agent = 0;
  std::vector<std::vector<double>> predicted_motion;  // (N+1) x 4
  std::vector<double> predicted_reward;               // N
  std::vector<std::vector<double>> target_motion;     // (N+1) x 4
  std::vector<double> target_reward;                  // N
};
std::vector<BeliefRecord> read_belief_records(const std::string& path);

}  // namespace bepal::run
