#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bepal/graph.hpp"
#include "bepal/rng.hpp"
#include "bepal/tensor.hpp"

namespace bepal::nn {

using num::Tensor;

inline constexpr double kDefaultLeakySlope = 0.01;

/// Weight entries ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : rng_(seed) {}
  /// Set to produce all-zero weights (used by tests that need exact symmetry).
  static ParamInit zeros() {
    ParamInit p(0);
    p.zero_ = true;
    return p;
  }

  Tensor weight(num::Shape shape, std::size_t fan_in);
  Tensor bias(std::size_t n) const { return Tensor::zeros({n}, true); }

 private:
  Rng rng_;
  bool zero_ = false;
};

struct Linear {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out), undefined when the layer has no bias

  static Linear create(std::size_t in, std::size_t out, bool has_bias, ParamInit& init);

  bool has_bias() const { return bias.defined(); }
  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  /// x: (n, in) -> (n, out)
  Tensor forward(const Tensor& x) const;
};

/// Several star graphs stacked into one node matrix. Graph g owns rows
/// [offsets[g], offsets[g+1]); its first row is the center node.
struct GraphBatch {
  Tensor features;  // (total_nodes, F)
  std::vector<std::size_t> offsets;

  std::size_t num_graphs() const { return offsets.size() - 1; }
  std::vector<std::size_t> center_rows() const;

  /// Throws when a graph is empty, has ragged feature rows, or its edge set
  /// is not exactly {(0, j) : j > 0}.
  static GraphBatch from_graphs(std::span<const ObservationGraph> graphs);
};

enum class HeadMerge { Concat, Single };

struct GatHead {
  Tensor weight;  // (F', F)
  Tensor attn;    // (2F'): first half scores the receiving node, second the sender
};

/// One multi-head graph attention layer over star graphs. Node i attends
/// over N_i plus itself: the center sees every node, a leaf sees the center
/// and itself.
struct GatLayer {
  std::vector<GatHead> heads;
  HeadMerge merge = HeadMerge::Concat;
  double negative_slope = kDefaultLeakySlope;

  static GatLayer create(std::size_t in, std::size_t head_dim, std::size_t n_heads, HeadMerge merge,
                         double slope, ParamInit& init);

  std::size_t out_features() const;
  std::vector<Tensor> parameters() const;
};

/// Attention coefficients of `node` over its normalization set for one head,
/// for a single graph given as an (n, F) feature tensor. Entry k belongs to
/// node normalization_set(n, node)[k].
std::vector<double> gat_attention(const GatLayer& layer, std::size_t head, const Tensor& graph_features,
                                  std::size_t node);
std::vector<std::size_t> normalization_set(std::size_t num_nodes, std::size_t node);

/// Updated features of every node: leaky_relu(sum_j delta_ij W f_j) per head,
/// concatenated across heads (Concat) or taken from the single head.
Tensor gat_forward(const GatLayer& layer, const GraphBatch& batch);

/// Differentiable aggregation sum_j delta_ij Wf_j for every node of every
/// star graph in the batch, given projected features Wf: (total, F') and an
/// attention vector (2F'). Exposed for direct testing.
Tensor star_attention(const Tensor& projected, const Tensor& attn, std::span<const std::size_t> offsets,
                      double negative_slope);

/// Scaled dot-product fusion of inbound messages.
///   queries: (B, H) hidden states, messages: (N, H)
///   returns (B, H) with c_b = sum_j softmax_j(q_b . k_j / sqrt(d_k)) u_j
Tensor message_attention(const Tensor& queries, const Tensor& messages, const Linear& w_query,
                         const Linear& w_key, const Linear& w_value);

/// Message attention weights (B, N) alongside the aggregate, for inspection.
Tensor message_attention_weights(const Tensor& queries, const Tensor& messages, const Linear& w_query,
                                 const Linear& w_key);

/// Four-gate LSTM with input width equal to hidden width. Gate rows of the
/// fused weight are ordered input, forget, candidate, output.
struct LstmCell {
  Linear gates;  // (4H, 2H) applied to [x, h]
  std::size_t hidden = 0;

  static LstmCell create(std::size_t hidden, ParamInit& init);

  /// x, h, s: (B, H) -> (h', s')
  std::pair<Tensor, Tensor> step(const Tensor& x, const Tensor& h, const Tensor& s) const;
};

}  // namespace bepal::nn
