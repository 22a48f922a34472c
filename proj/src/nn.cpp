#include "bepal/nn.hpp"

#include <cmath>
#include <string>

#include "bepal/error.hpp"
#include "bepal/ops.hpp"

namespace bepal::nn {

Tensor ParamInit::weight(num::Shape shape, std::size_t fan_in) {
  const std::size_t n = num::shape_numel(shape);
  std::vector<double> v(n, 0.0);
  if (!zero_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : v) x = rng_.uniform(-bound, bound);
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

Linear Linear::create(std::size_t in, std::size_t out, bool has_bias, ParamInit& init) {
  if (in == 0 || out == 0) throw ConfigError("Linear: dimensions must be positive");
  Linear l;
  l.weight = init.weight({out, in}, in);
  if (has_bias) l.bias = init.bias(out);
  return l;
}

Tensor Linear::forward(const Tensor& x) const { return num::linear(x, weight, has_bias() ? &bias : nullptr); }

std::vector<std::size_t> GraphBatch::center_rows() const {
  return {offsets.begin(), offsets.end() - 1};
}

GraphBatch GraphBatch::from_graphs(std::span<const ObservationGraph> graphs) {
  if (graphs.empty()) throw ShapeError("GraphBatch: no graphs");
  GraphBatch b;
  b.offsets.push_back(0);
  std::vector<double> flat;
  std::size_t width = 0;
  for (const auto& g : graphs) {
    if (g.num_nodes() == 0) throw ShapeError("GraphBatch: graph without a center node");
    if (g.edges.size() != g.num_nodes() - 1) throw ShapeError("GraphBatch: edge set is not a star centered on node 0");
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      if (g.edges[e].first != 0 || g.edges[e].second != e + 1)
        throw ShapeError("GraphBatch: edge (" + std::to_string(g.edges[e].first) + "," +
                         std::to_string(g.edges[e].second) + ") breaks the star topology");
    }
    for (const auto& f : g.node_features) {
      if (width == 0) width = f.size();
      if (f.size() != width || width == 0) throw ShapeError("GraphBatch: ragged node features");
      flat.insert(flat.end(), f.begin(), f.end());
    }
    b.offsets.push_back(b.offsets.back() + g.num_nodes());
  }
  b.features = Tensor::from({b.offsets.back(), width}, std::move(flat));
  return b;
}

GatLayer GatLayer::create(std::size_t in, std::size_t head_dim, std::size_t n_heads, HeadMerge merge, double slope,
                          ParamInit& init) {
  if (n_heads == 0) throw ConfigError("GatLayer: at least one head required");
  if (merge == HeadMerge::Single && n_heads != 1) throw ConfigError("GatLayer: single merge needs exactly one head");
  GatLayer layer;
  layer.merge = merge;
  layer.negative_slope = slope;
  for (std::size_t h = 0; h < n_heads; ++h) {
    GatHead head;
    head.weight = init.weight({head_dim, in}, in);
    head.attn = init.weight({2 * head_dim}, 2 * head_dim);
    layer.heads.push_back(std::move(head));
  }
  return layer;
}

std::size_t GatLayer::out_features() const {
  const std::size_t d = heads.front().weight.dim(0);
  return merge == HeadMerge::Concat ? d * heads.size() : d;
}

std::vector<Tensor> GatLayer::parameters() const {
  std::vector<Tensor> p;
  for (const auto& h : heads) {
    p.push_back(h.weight);
    p.push_back(h.attn);
  }
  return p;
}

std::vector<std::size_t> normalization_set(std::size_t num_nodes, std::size_t node) {
  if (node >= num_nodes) throw ShapeError("normalization_set: node index out of range");
  if (node != 0) return {0, node};
  std::vector<std::size_t> all(num_nodes);
  for (std::size_t j = 0; j < num_nodes; ++j) all[j] = j;
  return all;
}

namespace {

struct NodeAttention {
  std::vector<std::size_t> set;  // local node indices
  std::vector<double> pre;       // a^T [Wf_i || Wf_j] before the leaky relu
  std::vector<double> delta;
};

NodeAttention attend(const double* wf, std::size_t width, const double* attn, std::size_t n, std::size_t node,
                     double slope) {
  NodeAttention a;
  a.set = normalization_set(n, node);
  double src = 0.0;
  for (std::size_t k = 0; k < width; ++k) src += attn[k] * wf[node * width + k];
  double mx = -INFINITY;
  std::vector<double> z;
  for (auto j : a.set) {
    double dst = 0.0;
    for (std::size_t k = 0; k < width; ++k) dst += attn[width + k] * wf[j * width + k];
    const double u = src + dst;
    a.pre.push_back(u);
    z.push_back(u > 0.0 ? u : slope * u);
    mx = std::max(mx, z.back());
  }
  double total = 0.0;
  for (auto& v : z) total += (v = std::exp(v - mx));
  for (auto v : z) a.delta.push_back(v / total);
  return a;
}

}  // namespace

Tensor star_attention(const Tensor& projected, const Tensor& attn, std::span<const std::size_t> offsets,
                      double negative_slope) {
  if (projected.ndim() != 2) throw ShapeError("star_attention: projected features must be 2-D");
  const std::size_t width = projected.dim(1);
  if (attn.ndim() != 1 || attn.dim(0) != 2 * width)
    throw ShapeError("star_attention: attention vector " + num::shape_str(attn.shape()) + " does not match width " +
                     std::to_string(width));
  if (offsets.size() < 2 || offsets.back() != projected.dim(0))
    throw ShapeError("star_attention: graph offsets do not cover the node matrix");

  std::vector<double> out(projected.numel(), 0.0);
  const double* wf = projected.values().data();
  const double* a = attn.values().data();
  for (std::size_t g = 0; g + 1 < offsets.size(); ++g) {
    const std::size_t base = offsets[g], n = offsets[g + 1] - offsets[g];
    const double* gwf = wf + base * width;
    for (std::size_t i = 0; i < n; ++i) {
      const auto na = attend(gwf, width, a, n, i, negative_slope);
      double* dst = out.data() + (base + i) * width;
      for (std::size_t k = 0; k < na.set.size(); ++k)
        for (std::size_t c = 0; c < width; ++c) dst[c] += na.delta[k] * gwf[na.set[k] * width + c];
    }
  }
  std::vector<std::size_t> offs(offsets.begin(), offsets.end());
  return num::make_op_result(
      "star_attention", projected.shape(), std::move(out), {projected, attn},
      [projected, attn, offs, width, negative_slope](const num::detail::TensorData& o) mutable {
        const double* wf = projected.values().data();
        const double* a = attn.values().data();
        std::vector<double> d_wf(projected.numel(), 0.0);
        std::vector<double> d_attn(attn.numel(), 0.0);
        for (std::size_t g = 0; g + 1 < offs.size(); ++g) {
          const std::size_t base = offs[g], n = offs[g + 1] - offs[g];
          const double* gwf = wf + base * width;
          double* gdwf = d_wf.data() + base * width;
          for (std::size_t i = 0; i < n; ++i) {
            const double* dout = o.grad.data() + (base + i) * width;
            const auto na = attend(gwf, width, a, n, i, negative_slope);
            const std::size_t m = na.set.size();
            // d out / d delta_k = dout . Wf_k ; d out / d Wf_k += delta_k dout
            std::vector<double> d_delta(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
              const double* fk = gwf + na.set[k] * width;
              for (std::size_t c = 0; c < width; ++c) {
                d_delta[k] += dout[c] * fk[c];
                gdwf[na.set[k] * width + c] += na.delta[k] * dout[c];
              }
            }
            double dot = 0.0;
            for (std::size_t k = 0; k < m; ++k) dot += na.delta[k] * d_delta[k];
            double d_src = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
              const double dz = na.delta[k] * (d_delta[k] - dot);
              const double du = dz * (na.pre[k] > 0.0 ? 1.0 : negative_slope);
              d_src += du;
              const double* fk = gwf + na.set[k] * width;
              for (std::size_t c = 0; c < width; ++c) {
                gdwf[na.set[k] * width + c] += du * a[width + c];
                d_attn[width + c] += du * fk[c];
              }
            }
            const double* fi = gwf + i * width;
            for (std::size_t c = 0; c < width; ++c) {
              gdwf[i * width + c] += d_src * a[c];
              d_attn[c] += d_src * fi[c];
            }
          }
        }
        if (projected.requires_grad()) {
          auto g = projected.grad_buffer();
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += d_wf[k];
        }
        if (attn.requires_grad()) {
          auto g = attn.grad_buffer();
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += d_attn[k];
        }
      });
}

std::vector<double> gat_attention(const GatLayer& layer, std::size_t head, const Tensor& graph_features,
                                  std::size_t node) {
  if (head >= layer.heads.size()) throw ShapeError("gat_attention: head index out of range");
  const auto& h = layer.heads[head];
  const Tensor wf = num::linear(graph_features.detach(), h.weight.detach(), nullptr);
  const std::size_t width = wf.dim(1);
  return attend(wf.values().data(), width, h.attn.values().data(), wf.dim(0), node, layer.negative_slope).delta;
}

Tensor gat_forward(const GatLayer& layer, const GraphBatch& batch) {
  if (batch.features.dim(1) != layer.heads.front().weight.dim(1))
    throw ShapeError("gat_forward: node features " + num::shape_str(batch.features.shape()) +
                     " do not match layer input width " + std::to_string(layer.heads.front().weight.dim(1)));
  std::vector<Tensor> outs;
  outs.reserve(layer.heads.size());
  for (const auto& h : layer.heads) {
    const Tensor wf = num::linear(batch.features, h.weight, nullptr);
    outs.push_back(num::leaky_relu(star_attention(wf, h.attn, batch.offsets, layer.negative_slope),
                                   layer.negative_slope));
  }
  if (outs.size() == 1) return outs.front();
  return num::concat(outs, 1);
}

Tensor message_attention_weights(const Tensor& queries, const Tensor& messages, const Linear& w_query,
                                 const Linear& w_key) {
  const Tensor q = w_query.forward(queries);
  const Tensor k = w_key.forward(messages);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  return num::softmax(num::scale(num::matmul(q, num::transpose(k)), inv_sqrt_dk), 1);
}

Tensor message_attention(const Tensor& queries, const Tensor& messages, const Linear& w_query, const Linear& w_key,
                         const Linear& w_value) {
  if (queries.ndim() != 2 || messages.ndim() != 2 || queries.dim(1) != messages.dim(1))
    throw ShapeError("message_attention: queries " + num::shape_str(queries.shape()) + " and messages " +
                     num::shape_str(messages.shape()) + " must share their width");
  const Tensor alpha = message_attention_weights(queries, messages, w_query, w_key);
  return num::matmul(alpha, w_value.forward(messages));
}

LstmCell LstmCell::create(std::size_t hidden, ParamInit& init) {
  LstmCell cell;
  cell.hidden = hidden;
  cell.gates = Linear::create(2 * hidden, 4 * hidden, true, init);
  return cell;
}

std::pair<Tensor, Tensor> LstmCell::step(const Tensor& x, const Tensor& h, const Tensor& s) const {
  for (const Tensor* t : {&x, &h, &s}) {
    if (t->ndim() != 2 || t->dim(1) != hidden)
      throw ShapeError("lstm_step: expected (B, " + std::to_string(hidden) + "), got " + num::shape_str(t->shape()));
  }
  if (x.dim(0) != h.dim(0) || h.dim(0) != s.dim(0)) throw ShapeError("lstm_step: batch sizes differ");
  const Tensor xh = num::concat(std::vector<Tensor>{x, h}, 1);
  const Tensor z = gates.forward(xh);
  const std::size_t H = hidden;
  const Tensor in = num::sigmoid(num::slice(z, 1, 0, H));
  const Tensor forget = num::sigmoid(num::slice(z, 1, H, 2 * H));
  const Tensor cand = num::tanh(num::slice(z, 1, 2 * H, 3 * H));
  const Tensor out = num::sigmoid(num::slice(z, 1, 3 * H, 4 * H));
  Tensor s_next = num::add(num::mul(forget, s), num::mul(in, cand));
  Tensor h_next = num::mul(out, num::tanh(s_next));
  return {std::move(h_next), std::move(s_next)};
}

}  // namespace bepal::nn
