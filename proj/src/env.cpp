#include "bepal/env.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "bepal/error.hpp"

namespace bepal::env {

Move move_from_index(std::size_t index) {
  if (index >= kNumMoves) throw std::out_of_range("move index " + std::to_string(index) + " out of range");
  return static_cast<Move>(index);
}

void EnvConfig::validate() const {
  if (map_size < 3) throw ConfigError("map_size must be at least 3");
  if (n_agents < 1) throw ConfigError("n_agents must be at least 1");
  if (n_obstacles < 0) throw ConfigError("n_obstacles must be non-negative");
  if (n_obstacles >= map_size * map_size - n_agents - 1)
    throw ConfigError("n_obstacles must be below map_size^2 - n_agents - 1");
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (vision_radius < 0) throw ConfigError("vision_radius must be non-negative");
}

bool GridState::is_obstacle(Cell c) const { return std::binary_search(obstacles.begin(), obstacles.end(), c); }

bool GridState::all_reached() const { return std::all_of(reached.begin(), reached.end(), [](bool r) { return r; }); }

namespace {

bool in_bounds(int m, Cell c) { return c.row >= 0 && c.col >= 0 && c.row < m && c.col < m; }

Cell apply(Cell c, Move mv) {
  switch (mv) {
    case Move::Up: return {c.row - 1, c.col};
    case Move::Down: return {c.row + 1, c.col};
    case Move::Left: return {c.row, c.col - 1};
    case Move::Right: return {c.row, c.col + 1};
    case Move::Stay: return c;
  }
  return c;
}

// Intermediate cells of the Bresenham segment from a to b (endpoints excluded).
bool line_blocked(const GridState& s, Cell a, Cell b) {
  int r = a.row, c = a.col;
  const int dr = std::abs(b.row - a.row), dc = std::abs(b.col - a.col);
  const int sr = a.row < b.row ? 1 : -1, sc = a.col < b.col ? 1 : -1;
  int err = dc - dr;
  while (true) {
    if (r == b.row && c == b.col) return false;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
    if (r == b.row && c == b.col) return false;
    if (s.is_obstacle({r, c})) return true;
  }
}

}  // namespace

bool prey_reachable_by_all(const EnvConfig& config, const GridState& state) {
  const int m = config.map_size;
  std::vector<char> seen(static_cast<std::size_t>(m * m), 0);
  std::deque<Cell> frontier{state.prey};
  seen[static_cast<std::size_t>(state.prey.row * m + state.prey.col)] = 1;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    for (Move mv : {Move::Up, Move::Down, Move::Left, Move::Right}) {
      const Cell n = apply(c, mv);
      if (!in_bounds(m, n) || state.is_obstacle(n)) continue;
      auto& flag = seen[static_cast<std::size_t>(n.row * m + n.col)];
      if (flag) continue;
      flag = 1;
      frontier.push_back(n);
    }
  }
  return std::all_of(state.agents.begin(), state.agents.end(),
                     [&](Cell a) { return seen[static_cast<std::size_t>(a.row * m + a.col)] != 0; });
}

ObservationGraph observe(const EnvConfig& config, const GridState& state, std::size_t agent) {
  if (agent >= state.agents.size()) throw std::out_of_range("observe: agent index out of range");
  const double m = config.map_size;
  const Cell self = state.agents[agent];
  auto node = [&](Cell at, NodeType type, bool reached) {
    std::vector<double> f(kFeatureDim, 0.0);
    f[0] = (at.row - self.row) / m;
    f[1] = (at.col - self.col) / m;
    f[2 + static_cast<std::size_t>(type)] = 1.0;
    f[6] = reached ? 1.0 : 0.0;
    f[7] = at.row / m;
    f[8] = at.col / m;
    return f;
  };

  std::vector<std::vector<double>> nodes;
  auto center = node(self, NodeType::Self, state.reached[agent]);
  center[9] = static_cast<double>(state.step_count) / config.max_steps;
  nodes.push_back(std::move(center));

  const int r = config.vision_radius;
  for (int dr = -r; dr <= r; ++dr) {
    for (int dc = -r; dc <= r; ++dc) {
      const Cell c{self.row + dr, self.col + dc};
      if (!in_bounds(config.map_size, c)) continue;
      if (config.occluded_vision && line_blocked(state, self, c)) continue;
      for (std::size_t j = 0; j < state.agents.size(); ++j)
        if (j != agent && state.agents[j] == c) nodes.push_back(node(c, NodeType::Teammate, state.reached[j]));
      if (state.prey == c) nodes.push_back(node(c, NodeType::Prey, false));
      if (state.is_obstacle(c)) nodes.push_back(node(c, NodeType::Obstacle, false));
    }
  }
  return ObservationGraph::star(std::move(nodes));
}

std::vector<double> ground_truth(const EnvConfig& config, const GridState& state, const GridState& next) {
  if (state.episode_id != next.episode_id) throw std::invalid_argument("ground_truth: states from different episodes");
  if (state.agents.size() != next.agents.size()) throw std::invalid_argument("ground_truth: agent count differs");
  const double m = config.map_size;
  const std::size_t n = state.agents.size();
  std::vector<double> out((n + 1) * kMotionFeatures, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * kMotionFeatures;
    row[0] = next.agents[i].row / m;
    row[1] = next.agents[i].col / m;
    row[2] = next.agents[i].row - state.agents[i].row;
    row[3] = next.agents[i].col - state.agents[i].col;
  }
  double* prey = out.data() + n * kMotionFeatures;
  prey[0] = next.prey.row / m;
  prey[1] = next.prey.col / m;
  return out;
}

PredatorPrey::PredatorPrey(EnvConfig config) : config_(config) { config_.validate(); }

std::vector<ObservationGraph> PredatorPrey::reset(std::uint64_t seed) {
  const int m = config_.map_size;
  const auto n_cells = static_cast<std::size_t>(m * m);
  const auto n_agents = static_cast<std::size_t>(config_.n_agents);
  const auto n_obs = static_cast<std::size_t>(config_.n_obstacles);
  Rng rng(seed);
  std::vector<int> cells(n_cells);
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    std::iota(cells.begin(), cells.end(), 0);
    // Partial Fisher-Yates: the first k cells are a uniform k-subset in random order.
    const std::size_t k = n_agents + 1 + n_obs;
    for (std::size_t i = 0; i < k; ++i) std::swap(cells[i], cells[i + rng.below(n_cells - i)]);
    GridState s;
    for (std::size_t i = 0; i < n_agents; ++i) s.agents.push_back({cells[i] / m, cells[i] % m});
    s.prey = {cells[n_agents] / m, cells[n_agents] % m};
    for (std::size_t i = 0; i < n_obs; ++i) s.obstacles.push_back({cells[n_agents + 1 + i] / m, cells[n_agents + 1 + i] % m});
    std::sort(s.obstacles.begin(), s.obstacles.end());
    if (!prey_reachable_by_all(config_, s)) continue;
    s.episode_id = derive_seed(seed, ++episodes_started_);
    return reset_to(std::move(s));
  }
  throw ConfigError("reset: no layout with a reachable prey after " + std::to_string(kMaxPlacementAttempts) +
                    " attempts");
}

std::vector<ObservationGraph> PredatorPrey::reset_to(GridState layout) {
  const int m = config_.map_size;
  if (layout.agents.size() != static_cast<std::size_t>(config_.n_agents))
    throw ConfigError("reset_to: layout agent count differs from config");
  std::sort(layout.obstacles.begin(), layout.obstacles.end());
  for (Cell c : layout.agents)
    if (!in_bounds(m, c) || layout.is_obstacle(c)) throw ConfigError("reset_to: agent on an invalid cell");
  if (!in_bounds(m, layout.prey) || layout.is_obstacle(layout.prey)) throw ConfigError("reset_to: prey on an invalid cell");
  layout.reached.assign(layout.agents.size(), false);
  for (std::size_t i = 0; i < layout.agents.size(); ++i) layout.reached[i] = layout.agents[i] == layout.prey;
  layout.step_count = 0;
  state_ = std::move(layout);
  return observe_all();
}

bool PredatorPrey::done() const { return state_.all_reached() || state_.step_count >= config_.max_steps; }

StepResult PredatorPrey::step(std::span<const Move> actions) {
  if (actions.size() != state_.agents.size())
    throw std::invalid_argument("step: expected " + std::to_string(state_.agents.size()) + " actions");
  if (done()) throw std::logic_error("step: episode already finished");
  for (Move a : actions)
    if (static_cast<std::size_t>(a) >= kNumMoves) throw std::out_of_range("step: action out of range");

  StepResult res;
  res.rewards.resize(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    // Penalty applies while not caught at the start of the tick, so the
    // landing step is still penalized.
    res.rewards[i] = state_.reached[i] ? 0.0 : kStepPenalty;
    if (state_.reached[i]) continue;  // frozen on the prey
    const Cell target = apply(state_.agents[i], actions[i]);
    if (in_bounds(config_.map_size, target) && !state_.is_obstacle(target)) state_.agents[i] = target;
    if (state_.agents[i] == state_.prey) state_.reached[i] = true;
  }
  ++state_.step_count;
  res.done = done();
  res.per_agent_done = state_.reached;
  return res;
}

std::vector<ObservationGraph> PredatorPrey::observe_all() const {
  std::vector<ObservationGraph> out;
  out.reserve(state_.agents.size());
  for (std::size_t i = 0; i < state_.agents.size(); ++i) out.push_back(observe(i));
  return out;
}

std::string PredatorPrey::render() const {
  const int m = config_.map_size;
  std::string out;
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      const Cell cell{r, c};
      char ch = '.';
      if (state_.is_obstacle(cell)) ch = '#';
      if (state_.prey == cell) ch = 'P';
      if (std::find(state_.agents.begin(), state_.agents.end(), cell) != state_.agents.end()) ch = 'A';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows) {
  os << "step,agent,row,col,action,gate,reward\n";
  for (const auto& r : rows)
    os << r.step << ',' << r.agent << ',' << r.row << ',' << r.col << ',' << r.action << ',' << r.gate << ','
       << r.reward << '\n';
}

}  // namespace bepal::env
