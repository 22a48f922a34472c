#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bepal/graph.hpp"
#include "bepal/rng.hpp"

namespace bepal::env {

enum class Move : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3, Stay = 4 };
inline constexpr std::size_t kNumMoves = 5;

Move move_from_index(std::size_t index);

inline constexpr double kStepPenalty = -0.05;
inline constexpr std::size_t kFeatureDim = 10;
inline constexpr std::size_t kMotionFeatures = 4;

// Node type one-hot slots within an observation feature vector.
enum class NodeType : std::size_t { Self = 0, Teammate = 1, Prey = 2, Obstacle = 3 };

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct EnvConfig {
  int map_size = 8;
  int n_agents = 3;
  int n_obstacles = 0;
  int max_steps = 40;
  int vision_radius = 1;    // 1 => 3x3 window
  bool occluded_vision = false;

  /// Throws ConfigError when the configuration cannot host a layout.
  void validate() const;
  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct GridState {
  std::vector<Cell> agents;
  Cell prey;
  std::vector<Cell> obstacles;  // sorted
  std::vector<bool> reached;
  int step_count = 0;
  std::uint64_t episode_id = 0;

  bool is_obstacle(Cell c) const;
  bool all_reached() const;
};

struct StepResult {
  std::vector<double> rewards;
  bool done = false;
  std::vector<bool> per_agent_done;
};

/// Every agent has a 4-connected obstacle-free path to the prey.
bool prey_reachable_by_all(const EnvConfig& config, const GridState& state);

/// Star graph of agent `agent`'s view. Features per node:
///   [rel_row/m, rel_col/m, is_self, is_teammate, is_prey, is_obstacle,
///    reached, abs_row/m, abs_col/m, step_count/max_steps]
/// `reached` is the node's own flag (agents only); the time feature is set
/// on the center node only. Leaves are ordered by cell (row-major), then
/// teammates by index, prey, obstacle.
ObservationGraph observe(const EnvConfig& config, const GridState& state, std::size_t agent);

/// Flat (N+1) x 4 motion target: per agent (row'/m, col'/m, drow, dcol),
/// then the prey as (row/m, col/m, 0, 0). `next` must come from the same
/// episode.
std::vector<double> ground_truth(const EnvConfig& config, const GridState& state, const GridState& next);

/// Predator-prey gridworld with a stationary prey and impassable obstacles.
class PredatorPrey {
 public:
  explicit PredatorPrey(EnvConfig config);

  /// Random layout from `seed`, regenerated until the prey is reachable by
  /// every agent (at most kMaxPlacementAttempts tries).
  std::vector<ObservationGraph> reset(std::uint64_t seed);
  /// Installs a hand-built layout. reached[] is recomputed from positions.
  std::vector<ObservationGraph> reset_to(GridState layout);

  StepResult step(std::span<const Move> actions);

  ObservationGraph observe(std::size_t agent) const { return env::observe(config_, state_, agent); }
  std::vector<ObservationGraph> observe_all() const;

  const GridState& state() const { return state_; }
  const EnvConfig& config() const { return config_; }
  bool done() const;

  /// One character per cell: A agent, P prey, # obstacle, . empty.
  std::string render() const;

  static constexpr int kMaxPlacementAttempts = 1000;

 private:
  EnvConfig config_;
  GridState state_;
  std::uint64_t episodes_started_ = 0;
};

/// One row of an exported episode trace.
struct TraceRow {
  int step = 0;
  int agent = 0;
  int row = 0;
  int col = 0;
  int action = 0;
  int gate = 0;
  double reward = 0.0;
};

void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows);

}  // namespace bepal::env
