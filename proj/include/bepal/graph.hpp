#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace bepal {

/// Objects in one agent's view. Node 0 is the observing agent; every other
/// node is connected to it only (star topology).
struct ObservationGraph {
  std::vector<std::vector<double>> node_features;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t num_nodes() const { return node_features.size(); }

  /// Star graph over the given nodes with edges (0, j) for j > 0.
  static ObservationGraph star(std::vector<std::vector<double>> features) {
    ObservationGraph g;
    g.node_features = std::move(features);
    for (std::size_t j = 1; j < g.node_features.size(); ++j) g.edges.emplace_back(0, j);
    return g;
  }
};

}  // namespace bepal
