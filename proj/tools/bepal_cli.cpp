// bepal: train, evaluate and inspect BEPAL agents on Predator-Prey.
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bepal/error.hpp"
#include "bepal/run.hpp"

using namespace bepal;

namespace {

void print_report(const std::string& label, const eval::EvalReport& r) {
  std::printf("%s: episodes %zu avg_steps %.4f std_steps %.4f completion_rate %.4f avg_return %.4f", label.c_str(),
              r.n_episodes, r.avg_steps, r.std_steps, r.completion_rate, r.avg_return);
  if (r.motion_mse) std::printf(" motion_mse %.6f reward_mse %.6f", *r.motion_mse, *r.reward_mse);
  std::printf("\n");
}

struct TrainFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> episodes;
  std::optional<std::string> out;
  bool no_motion = false, no_reward = false, no_aux = false, resume = false;

  void add_to(CLI::App* cmd, bool single_seed) {
    cmd->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    if (single_seed) cmd->add_option("--seed", seed, "training seed");
    cmd->add_option("--epochs", epochs, "number of epochs");
    cmd->add_option("--episodes-per-epoch", episodes, "episodes per optimizer step");
    cmd->add_option("--out", out, "output directory for runs");
    cmd->add_flag("--no-motion-pred", no_motion, "drop the motion-prediction loss");
    cmd->add_flag("--no-reward-pred", no_reward, "drop the reward-prediction loss");
    cmd->add_flag("--no-aux", no_aux, "drop both auxiliary losses");
    cmd->add_flag("--resume", resume, "continue from the latest checkpoint of the run");
  }

  run::RunConfig resolve() const {
    auto c = run::load_run_config(config);
    run::Overrides o;
    o.seed = seed;
    o.epochs = epochs;
    o.episodes_per_epoch = episodes;
    o.out_dir = out;
    o.no_motion = no_motion;
    o.no_reward = no_reward;
    o.no_aux = no_aux;
    run::apply(c, o);
    return c;
  }
};

struct EvalFlags {
  std::string checkpoint;
  std::optional<std::string> config;
  std::optional<std::string> report;
  std::size_t episodes = 200;
  std::uint64_t seed = 12345;
  bool greedy = false;

  void add_to(CLI::App* cmd, bool needs_checkpoint, const std::string& config_help) {
    if (needs_checkpoint)
      cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--config", config, config_help)->check(CLI::ExistingFile);
    cmd->add_option("--episodes", episodes, "evaluation episodes")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "evaluation seed");
    cmd->add_option("--report", report, "write a JSON report here");
    if (needs_checkpoint) cmd->add_flag("--greedy", greedy, "argmax actions instead of sampling");
  }

  run::EvalRequest request() const {
    run::EvalRequest r;
    r.n_episodes = episodes;
    r.seed = seed;
    r.options.greedy = greedy;
    return r;
  }

  std::optional<env::EnvConfig> env() const {
    if (!config) return std::nullopt;
    return run::load_run_config(*config).env;
  }
};

}  // namespace

int main(int argc, char** argv) {
  run::set_log_level(run::log_level_from_env());
  CLI::App app{"BEPAL: belief-based predictive auxiliary learning on Predator-Prey"};
  app.set_version_flag("--version", run::code_version());
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train one run");
  train_flags.add_to(train_cmd, true);

  TrainFlags ablate_flags;
  std::vector<std::uint64_t> ablate_seeds{1, 2, 3};
  std::size_t ablate_tail = 20;
  auto* ablate_cmd = app.add_subcommand("ablate", "train the four ablation variants and compare them");
  ablate_flags.add_to(ablate_cmd, false);
  ablate_cmd->add_option("--seed", ablate_seeds, "training seeds")->expected(1, -1);
  ablate_cmd->add_option("--tail", ablate_tail, "epochs averaged for the final score");

  EvalFlags eval_flags;
  bool eval_beliefs = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint without updates");
  eval_flags.add_to(eval_cmd, true, "evaluate on this configuration's environment instead");
  eval_cmd->add_flag("--beliefs", eval_beliefs, "also score the belief decoder");

  EvalFlags transfer_flags;
  auto* transfer_cmd = app.add_subcommand("transfer", "evaluate a checkpoint on another map");
  transfer_flags.add_to(transfer_cmd, true, "target configuration");
  transfer_cmd->get_option("--config")->required();

  EvalFlags export_flags;
  std::string export_out;
  auto* export_cmd = app.add_subcommand("export-beliefs", "write per-step belief snapshots as JSON lines");
  export_flags.add_to(export_cmd, true, "play on this configuration's environment instead");
  export_cmd->add_option("--out", export_out, "output .jsonl path")->required();

  EvalFlags random_flags;
  auto* random_cmd = app.add_subcommand("baseline-random", "measure the uniform random policy");
  random_flags.add_to(random_cmd, false, "run configuration whose environment is measured");
  random_cmd->get_option("--config")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      const auto c = train_flags.resolve();
      const auto res = run::cmd_train(c, train_flags.resume);
      const auto& last = res.history.back();
      std::printf("%s: epoch %d avg_steps %.4f completion_rate %.4f\n", res.dir.c_str(), last.epoch, last.avg_steps,
                  last.completion_rate);
    } else if (*ablate_cmd) {
      const auto c = ablate_flags.resolve();
      const auto rows = run::cmd_ablate(c, ablate_seeds, ablate_tail, ablate_flags.resume);
      std::printf("%-32s %12s %12s %12s\n", "variant", "avg_steps", "std", "completion");
      for (const auto& r : rows)
        std::printf("%-32s %12.4f %12.4f %12.4f\n", r.variant.c_str(), r.mean_steps, r.std_steps, r.mean_completion);
    } else if (*eval_cmd) {
      auto req = eval_flags.request();
      req.options.decode_beliefs = eval_beliefs;
      print_report("eval", run::cmd_eval(eval_flags.checkpoint, eval_flags.env(), req, eval_flags.report));
    } else if (*transfer_cmd) {
      const auto r = run::cmd_transfer(transfer_flags.checkpoint, *transfer_flags.env(), transfer_flags.request(),
                                       transfer_flags.report);
      print_report("transfer", r.model);
      print_report("random", r.random);
    } else if (*export_cmd) {
      const auto n = run::cmd_export_beliefs(export_flags.checkpoint, export_flags.env(), export_flags.request(),
                                             export_out);
      std::printf("wrote %zu records to %s\n", n, export_out.c_str());
    } else if (*random_cmd) {
      print_report("random", run::cmd_baseline_random(*random_flags.env(), random_flags.request(), random_flags.report));
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
