#include "bepal/run.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "bepal/error.hpp"

#ifndef BEPAL_VERSION
#define BEPAL_VERSION "0.0.0"
#endif

namespace bepal::run {

namespace fs = std::filesystem;

const char* code_version() { return "bepal " BEPAL_VERSION; }

namespace {

LogLevel g_level = log_level_from_env();

const char* level_name(LogLevel l) {
  switch (l) {
    case LogLevel::Error: return "error";
    case LogLevel::Warn: return "warn";
    case LogLevel::Info: return "info";
    case LogLevel::Debug: return "debug";
  }
  return "?";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

train::TrainConfig train_config_from_json(const json& j, int n_agents) {
  const std::string w = "train";
  reject_unknown(j,
                 {"gamma", "critic_weight", "motion_weight", "reward_weight", "entropy_coef", "learning_rate",
                  "smoothing", "rms_epsilon", "max_grad_norm", "episodes_per_epoch", "updates_per_epoch", "epochs", "seed", "no_motion",
                  "no_reward", "no_aux"},
                 w);
  auto c = train::TrainConfig::defaults_for(n_agents);
  read_key(j, "gamma", c.gamma, w);
  read_key(j, "critic_weight", c.critic_weight, w);
  read_key(j, "motion_weight", c.motion_weight, w);
  read_key(j, "reward_weight", c.reward_weight, w);
  read_key(j, "entropy_coef", c.entropy_coef, w);
  read_key(j, "learning_rate", c.learning_rate, w);
  read_key(j, "smoothing", c.smoothing, w);
  read_key(j, "rms_epsilon", c.rms_epsilon, w);
  read_key(j, "max_grad_norm", c.max_grad_norm, w);
  read_key(j, "episodes_per_epoch", c.episodes_per_epoch, w);
  read_key(j, "updates_per_epoch", c.updates_per_epoch, w);
  read_key(j, "epochs", c.epochs, w);
  read_key(j, "seed", c.seed, w);
  read_key(j, "no_motion", c.no_motion, w);
  read_key(j, "no_reward", c.no_reward, w);
  read_key(j, "no_aux", c.no_aux, w);
  return c;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json cells_json(const std::vector<env::Cell>& cells) {
  json a = json::array();
  for (const auto& c : cells) a.push_back({c.row, c.col});
  return a;
}

}  // namespace

LogLevel log_level_from_env() {
  const char* v = std::getenv("BEPAL_LOG_LEVEL");
  if (!v) return LogLevel::Info;
  const std::string s = v;
  if (s == "error") return LogLevel::Error;
  if (s == "warn") return LogLevel::Warn;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log(LogLevel level, const std::string& message) {
  if (level > g_level) return;
  std::cerr << "[" << level_name(level) << "] " << message << "\n";
}

void RunConfig::validate() const {
  if (name.empty()) throw ConfigError("run name must not be empty");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be at least 1");
  env.validate();
  train.validate();
}

json to_json(const env::EnvConfig& c) {
  return {{"map_size", c.map_size},         {"n_agents", c.n_agents},
          {"n_obstacles", c.n_obstacles},   {"max_steps", c.max_steps},
          {"vision_radius", c.vision_radius}, {"occluded_vision", c.occluded_vision}};
}

json to_json(const train::TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"critic_weight", c.critic_weight},
          {"motion_weight", c.motion_weight},
          {"reward_weight", c.reward_weight},
          {"entropy_coef", c.entropy_coef},
          {"learning_rate", c.learning_rate},
          {"smoothing", c.smoothing},
          {"rms_epsilon", c.rms_epsilon},
          {"max_grad_norm", c.max_grad_norm},
          {"episodes_per_epoch", c.episodes_per_epoch},
          {"updates_per_epoch", c.updates_per_epoch},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"no_motion", c.no_motion},
          {"no_reward", c.no_reward},
          {"no_aux", c.no_aux}};
}

json to_json(const RunConfig& c) {
  return {{"name", c.name},
          {"out_dir", c.out_dir},
          {"checkpoint_every", c.checkpoint_every},
          {"env", to_json(c.env)},
          {"train", to_json(c.train)}};
}

env::EnvConfig env_config_from_json(const json& j) {
  const std::string w = "env";
  reject_unknown(j, {"map_size", "n_agents", "n_obstacles", "max_steps", "vision_radius", "occluded_vision"}, w);
  env::EnvConfig c;
  read_key(j, "map_size", c.map_size, w);
  read_key(j, "n_agents", c.n_agents, w);
  read_key(j, "n_obstacles", c.n_obstacles, w);
  read_key(j, "max_steps", c.max_steps, w);
  read_key(j, "vision_radius", c.vision_radius, w);
  read_key(j, "occluded_vision", c.occluded_vision, w);
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  const std::string w = "config";
  reject_unknown(j, {"name", "out_dir", "checkpoint_every", "env", "train"}, w);
  RunConfig c;
  read_key(j, "name", c.name, w);
  read_key(j, "out_dir", c.out_dir, w);
  read_key(j, "checkpoint_every", c.checkpoint_every, w);
  if (j.contains("env")) c.env = env_config_from_json(j.at("env"));
  c.train = train_config_from_json(j.contains("train") ? j.at("train") : json::object(), c.env.n_agents);
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& c) { write_text(path, to_json(c).dump(2) + "\n"); }

void apply(RunConfig& c, const Overrides& o) {
  if (o.seed) c.train.seed = *o.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.episodes_per_epoch) c.train.episodes_per_epoch = *o.episodes_per_epoch;
  if (o.out_dir) c.out_dir = *o.out_dir;
  c.train.no_motion = c.train.no_motion || o.no_motion;
  c.train.no_reward = c.train.no_reward || o.no_reward;
  c.train.no_aux = c.train.no_aux || o.no_aux;
  c.validate();
}

std::string run_dir(const RunConfig& c) {
  return (fs::path(c.out_dir) / (c.name + "-s" + std::to_string(c.train.seed))).string();
}

const std::string& metrics_header() {
  static const std::string h =
      "epoch,avg_steps,completion_rate,avg_return,actor,critic,aux_motion,aux_reward,entropy,total,motion_mse,"
      "reward_mse,grad_norm";
  return h;
}

std::string format_metrics_row(const train::EpochMetrics& m) {
  std::string s = std::to_string(m.epoch);
  for (double v : {m.avg_steps, m.completion_rate, m.avg_return, m.actor, m.critic, m.aux_motion, m.aux_reward,
                   m.entropy, m.total, m.motion_mse, m.reward_mse, m.grad_norm})
    s += "," + fmt(v);
  return s;
}

train::EpochMetrics parse_metrics_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  for (std::string item; std::getline(ss, item, ',');) f.push_back(item);
  if (f.size() != 13) throw std::runtime_error("metrics row has " + std::to_string(f.size()) + " fields: " + line);
  train::EpochMetrics m;
  std::size_t pos = 0;
  m.epoch = std::stoi(f[0], &pos);
  if (pos != f[0].size()) throw std::runtime_error("bad epoch field: " + f[0]);
  double* dst[] = {&m.avg_steps, &m.completion_rate, &m.avg_return, &m.actor,      &m.critic,     &m.aux_motion,
                   &m.aux_reward, &m.entropy,        &m.total,      &m.motion_mse, &m.reward_mse, &m.grad_norm};
  for (std::size_t i = 0; i < 12; ++i) {
    char* end = nullptr;
    *dst[i] = std::strtod(f[i + 1].c_str(), &end);
    if (end == f[i + 1].c_str() || *end != '\0') throw std::runtime_error("bad metrics field: " + f[i + 1]);
  }
  return m;
}

std::vector<train::EpochMetrics> read_metrics_log(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != metrics_header())
    throw std::runtime_error(path + ": missing or unexpected metrics header");
  std::vector<train::EpochMetrics> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(parse_metrics_row(line));
    if (out.size() > 1 && out.back().epoch <= out[out.size() - 2].epoch)
      throw std::runtime_error(path + ": epochs are not strictly increasing");
  }
  return out;
}

io::Checkpoint make_checkpoint(const RunConfig& c, const train::TrainerState& state) {
  io::Checkpoint ck;
  const auto& d = state.params.dims;
  json meta = {{"code_version", code_version()},
               {"run_config", to_json(c)},
               {"epoch", state.epoch},
               {"rng_state", state.rng.state()},
               {"dims",
                {{"n_agents", d.n_agents},
                 {"feature_dim", d.feature_dim},
                 {"gat_heads", d.gat_heads},
                 {"gat_head_dim", d.gat_head_dim},
                 {"hidden", d.hidden},
                 {"key_dim", d.key_dim},
                 {"motion_hidden", d.motion_hidden}}}};
  ck.metadata = meta.dump();
  ck.tensors = io::collect_tensors(state);
  return ck;
}

LoadedRun load_run_checkpoint(const std::string& path) {
  const auto ck = io::load_checkpoint_file(path);
  json meta;
  try {
    meta = json::parse(ck.metadata);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": corrupt checkpoint metadata: " + e.what());
  }
  LoadedRun r{run_config_from_json(meta.at("run_config")), train::TrainerState{}};
  r.state = train::TrainerState::fresh(r.config.env, r.config.train);
  io::restore_tensors(ck, r.state);
  r.state.rng.set_state(meta.at("rng_state").get<std::string>());
  r.state.epoch = meta.at("epoch").get<int>();
  return r;
}

std::string checkpoint_path(const std::string& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch-%06d.ckpt", epoch);
  return (fs::path(dir) / "checkpoints" / name).string();
}

std::optional<std::string> latest_checkpoint(const std::string& dir) {
  const fs::path cdir = fs::path(dir) / "checkpoints";
  if (!fs::is_directory(cdir)) return std::nullopt;
  std::optional<std::string> best;
  for (const auto& e : fs::directory_iterator(cdir)) {
    const std::string n = e.path().filename().string();
    if (n.rfind("epoch-", 0) != 0 || e.path().extension() != ".ckpt") continue;
    if (!best || n > fs::path(*best).filename().string()) best = e.path().string();
  }
  return best;
}

TrainResult cmd_train(const RunConfig& c, bool resume) {
  c.validate();
  TrainResult res{run_dir(c), {}, train::TrainerState{}};
  const fs::path dir = res.dir;
  const fs::path metrics = dir / "metrics.csv";
  const fs::path timing = dir / "timing.csv";
  fs::create_directories(dir / "checkpoints");

  std::optional<std::string> ckpt = resume ? latest_checkpoint(res.dir) : std::nullopt;
  if (ckpt) {
    auto loaded = load_run_checkpoint(*ckpt);
    RunConfig saved = loaded.config;
    saved.train.epochs = c.train.epochs;
    saved.out_dir = c.out_dir;
    if (!(saved == c)) throw ConfigError("resume: configuration differs from the checkpoint in " + res.dir);
    res.state = std::move(loaded.state);
    auto rows = read_metrics_log(metrics.string());
    std::erase_if(rows, [&](const train::EpochMetrics& m) { return m.epoch > res.state.epoch; });
    if (static_cast<int>(rows.size()) != res.state.epoch)
      throw std::runtime_error("resume: metrics log is missing rows before epoch " + std::to_string(res.state.epoch));
    res.history = rows;
    std::string text = metrics_header() + "\n";
    for (const auto& m : rows) text += format_metrics_row(m) + "\n";
    write_text(metrics, text);
    std::vector<std::string> kept;
    {
      std::ifstream is(timing);
      for (std::string line; std::getline(is, line);) {
        if (kept.empty()) {
          kept.push_back(line);
          continue;
        }
        if (std::stoi(line.substr(0, line.find(','))) <= res.state.epoch) kept.push_back(line);
      }
    }
    std::string ttext;
    for (const auto& l : kept) ttext += l + "\n";
    write_text(timing, ttext.empty() ? "epoch,wall_seconds\n" : ttext);
    log(LogLevel::Info, "resuming " + res.dir + " from epoch " + std::to_string(res.state.epoch));
  } else {
    res.state = train::TrainerState::fresh(c.env, c.train);
    write_text(metrics, metrics_header() + "\n");
    write_text(timing, "epoch,wall_seconds\n");
  }
  save_run_config((dir / "config.json").string(), c);
  write_text(dir / "VERSION", std::string(code_version()) + "\n");

  std::ofstream mlog(metrics, std::ios::app);
  std::ofstream tlog(timing, std::ios::app);
  while (res.state.epoch < c.train.epochs) {
    const auto t0 = std::chrono::steady_clock::now();
    auto m = train::train_epoch(res.state, c.env, c.train);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    mlog << format_metrics_row(m) << "\n" << std::flush;
    tlog << m.epoch << "," << fmt(secs) << "\n" << std::flush;
    res.history.push_back(m);
    if (m.epoch % c.checkpoint_every == 0 || m.epoch == c.train.epochs)
      io::save_checkpoint_file(checkpoint_path(res.dir, m.epoch), make_checkpoint(c, res.state));
    if (log_level() >= LogLevel::Debug || (log_level() >= LogLevel::Info && m.epoch % 10 == 0)) {
      std::ostringstream os;
      os << res.dir << " epoch " << m.epoch << " avg_steps " << m.avg_steps << " completion " << m.completion_rate
         << " motion_mse " << m.motion_mse << " reward_mse " << m.reward_mse;
      log(LogLevel::Info, os.str());
    }
  }
  return res;
}

json report_to_json(const eval::EvalReport& r) {
  json j = {{"n_episodes", r.n_episodes},
            {"avg_steps", r.avg_steps},
            {"std_steps", r.std_steps},
            {"completion_rate", r.completion_rate},
            {"avg_return", r.avg_return}};
  j["motion_mse"] = r.motion_mse ? json(*r.motion_mse) : json(nullptr);
  j["reward_mse"] = r.reward_mse ? json(*r.reward_mse) : json(nullptr);
  json eps = json::array();
  for (const auto& e : r.episodes)
    eps.push_back({{"env_seed", e.env_seed}, {"steps", e.steps}, {"completed", e.completed}, {"avg_return", e.avg_return}});
  j["episodes"] = eps;
  return j;
}

namespace {

void write_report(const std::optional<std::string>& path, const json& j) {
  if (!path) return;
  const fs::path p = *path;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  write_text(p, j.dump(2) + "\n");
}

}  // namespace

eval::EvalReport cmd_eval(const std::string& checkpoint, const std::optional<env::EnvConfig>& env_override,
                          const EvalRequest& request, const std::optional<std::string>& report_path) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint);
  const auto loaded = load_run_checkpoint(checkpoint);
  const env::EnvConfig cfg = env_override.value_or(loaded.config.env);
  auto opts = request.options;
  opts.gamma = loaded.config.train.gamma;
  auto rep = eval::evaluate(loaded.state.params, cfg, request.n_episodes, request.seed, opts);
  json j = {{"checkpoint", checkpoint}, {"env", to_json(cfg)}, {"seed", request.seed}, {"report", report_to_json(rep)}};
  write_report(report_path, j);
  return rep;
}

TransferReport cmd_transfer(const std::string& checkpoint, const env::EnvConfig& target, const EvalRequest& request,
                            const std::optional<std::string>& report_path) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint);
  const auto loaded = load_run_checkpoint(checkpoint);
  auto opts = request.options;
  opts.gamma = loaded.config.train.gamma;
  TransferReport r{eval::transfer_eval(loaded.state.params, target, request.n_episodes, request.seed, opts),
                   eval::evaluate_random_policy(target, request.n_episodes, request.seed)};
  json j = {{"checkpoint", checkpoint},
            {"source_env", to_json(loaded.config.env)},
            {"target_env", to_json(target)},
            {"seed", request.seed},
            {"model", report_to_json(r.model)},
            {"random", report_to_json(r.random)}};
  write_report(report_path, j);
  return r;
}

eval::EvalReport cmd_baseline_random(const env::EnvConfig& config, const EvalRequest& request,
                                     const std::optional<std::string>& report_path) {
  auto rep = eval::evaluate_random_policy(config, request.n_episodes, request.seed);
  write_report(report_path, {{"env", to_json(config)}, {"seed", request.seed}, {"report", report_to_json(rep)}});
  return rep;
}

double tail_mean_steps(const std::vector<train::EpochMetrics>& h, std::size_t tail) {
  if (h.empty() || tail == 0) throw std::invalid_argument("tail_mean_steps: empty history");
  const std::size_t k = std::min(tail, h.size());
  double s = 0.0;
  for (std::size_t i = h.size() - k; i < h.size(); ++i) s += h[i].avg_steps;
  return s / static_cast<double>(k);
}

double tail_mean_completion(const std::vector<train::EpochMetrics>& h, std::size_t tail) {
  if (h.empty() || tail == 0) throw std::invalid_argument("tail_mean_completion: empty history");
  const std::size_t k = std::min(tail, h.size());
  double s = 0.0;
  for (std::size_t i = h.size() - k; i < h.size(); ++i) s += h[i].completion_rate;
  return s / static_cast<double>(k);
}

std::vector<AblationRow> cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds, std::size_t tail,
                                    bool resume) {
  if (seeds.empty()) throw std::invalid_argument("cmd_ablate: no seeds");
  static constexpr const char* tags[4] = {"full", "no_reward", "no_motion", "no_aux"};
  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < 4; ++v) {
    AblationRow row;
    row.variant = kAblationVariants[v];
    double completion = 0.0;
    for (auto seed : seeds) {
      RunConfig c = base;
      c.name = base.name + "-" + tags[v];
      c.train.seed = seed;
      c.train.no_reward = v == 1;
      c.train.no_motion = v == 2;
      c.train.no_aux = v == 3;
      const auto res = cmd_train(c, resume);
      row.final_steps.push_back(tail_mean_steps(res.history, tail));
      completion += tail_mean_completion(res.history, tail);
    }
    const double n = static_cast<double>(seeds.size());
    for (double s : row.final_steps) row.mean_steps += s;
    row.mean_steps /= n;
    for (double s : row.final_steps) row.std_steps += (s - row.mean_steps) * (s - row.mean_steps);
    row.std_steps = std::sqrt(row.std_steps / n);
    row.mean_completion = completion / n;
    rows.push_back(row);
  }
  fs::create_directories(base.out_dir);
  std::string text = "variant,seeds,mean_steps,std_steps,mean_completion\n";
  for (const auto& r : rows)
    text += "\"" + r.variant + "\"," + std::to_string(seeds.size()) + "," + fmt(r.mean_steps) + "," +
            fmt(r.std_steps) + "," + fmt(r.mean_completion) + "\n";
  write_text(fs::path(base.out_dir) / (base.name + "-ablation.csv"), text);
  return rows;
}

std::size_t cmd_export_beliefs(const std::string& checkpoint, const std::optional<env::EnvConfig>& env_override,
                               const EvalRequest& request, const std::string& out_path) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint not found: " + checkpoint);
  const auto loaded = load_run_checkpoint(checkpoint);
  const env::EnvConfig cfg = env_override.value_or(loaded.config.env);
  if (static_cast<std::size_t>(cfg.n_agents) != loaded.state.params.dims.n_agents)
    throw ConfigError("export-beliefs: environment and checkpoint disagree on the number of agents");
  const double m = cfg.map_size;
  const auto n = static_cast<std::size_t>(cfg.n_agents);
  auto grid_units = [&](std::vector<std::vector<double>> rows) {
    for (auto& r : rows) {
      r[0] *= m;
      r[1] *= m;
    }
    return rows;
  };

  const fs::path p = out_path;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + out_path);

  env::PredatorPrey env(cfg);
  std::size_t records = 0;
  for (std::size_t k = 0; k < request.n_episodes; ++k) {
    Rng rng(derive_seed(request.seed, k, 1));
    const auto policy = request.options.greedy ? model::greedy_policy() : model::sampling_policy(rng);
    const std::uint64_t env_seed = derive_seed(request.seed, k);
    const auto batch = train::rollout_episode(loaded.state.params, env, env_seed, policy, true);
    const auto targets = train::build_targets(cfg, batch, loaded.config.train.gamma);
    for (std::size_t t = 0; t < batch.length(); ++t) {
      const auto& st = batch.states[t];
      const auto& rec = batch.steps[t];
      const auto target_motion = grid_units(model::motion_matrix(
          num::Tensor::from({1, targets.motion[t].size()}, targets.motion[t]), 0, n));
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> pred_reward(n);
        for (std::size_t j = 0; j < n; ++j) pred_reward[j] = rec.beliefs->reward.at(i, j);
        json j = {{"episode", k},
                  {"env_seed", env_seed},
                  {"step", t},
                  {"agent", i},
                  {"map_size", cfg.map_size},
                  {"agents", cells_json(st.agents)},
                  {"prey", {st.prey.row, st.prey.col}},
                  {"obstacles", cells_json(st.obstacles)},
                  {"reached", st.reached},
                  {"move", rec.actions.moves[i]},
                  {"gate", rec.actions.gates[i]},
                  {"predicted_motion", grid_units(model::motion_matrix(rec.beliefs->motion, i, n))},
                  {"predicted_reward", pred_reward},
                  {"target_motion", target_motion},
                  {"target_reward", targets.reward[t]}};
        os << j.dump() << "\n";
        ++records;
      }
    }
  }
  if (!os) throw std::runtime_error("write failed for " + out_path);
  return records;
}

std::vector<BeliefRecord> read_belief_records(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::vector<BeliefRecord> out;
  for (std::string line; std::getline(is, line);) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    BeliefRecord r;
    r.episode = j.at("episode").get<std::size_t>();
    r.step = j.at("step").get<std::size_t>();
    r.agent = j.at("agent").get<std::size_t>();
    r.predicted_motion = j.at("predicted_motion").get<std::vector<std::vector<double>>>();
    r.predicted_reward = j.at("predicted_reward").get<std::vector<double>>();
    r.target_motion = j.at("target_motion").get<std::vector<std::vector<double>>>();
    r.target_reward = j.at("target_reward").get<std::vector<double>>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bepal::run
