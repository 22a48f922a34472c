#include "bepal/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "bepal/error.hpp"

namespace bepal::num {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b, const char* why) {
  throw ShapeError(std::string(op) + ": " + why + " " + shape_str(a.shape()) + " vs " +
                   shape_str(b.shape()));
}

void require_2d(const char* op, const Tensor& a) {
  if (a.ndim() != 2) throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + shape_str(a.shape()));
}

bool is_row_bias(const Tensor& a, const Tensor& b) {
  return a.ndim() == 2 && b.ndim() == 1 && b.dim(0) == a.dim(1);
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void accumulate(const Tensor& t, std::span<const double> g, double factor = 1.0) {
  if (!t.requires_grad()) return;
  auto buf = t.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += factor * g[i];
}

Tensor add_like(const char* op, const Tensor& a, const Tensor& b, double sign) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    auto av = a.values(), bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + sign * bv[i];
    return make_op_result(op, a.shape(), std::move(out), {a, b},
                          [a, b, sign](const detail::TensorData& o) mutable {
                            accumulate(a, o.grad);
                            accumulate(b, o.grad, sign);
                          });
  }
  if (is_row_bias(a, b)) {
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    std::vector<double> out(a.numel());
    auto av = a.values(), bv = b.values();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] + sign * bv[c];
    return make_op_result(op, a.shape(), std::move(out), {a, b},
                          [a, b, sign, rows, cols](const detail::TensorData& o) mutable {
                            accumulate(a, o.grad);
                            if (b.requires_grad()) {
                              auto gb = b.grad_buffer();
                              for (std::size_t r = 0; r < rows; ++r)
                                for (std::size_t c = 0; c < cols; ++c) gb[c] += sign * o.grad[r * cols + c];
                            }
                          });
  }
  shape_fail(op, a, b, "shape mismatch");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_like("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_like("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_fail("mul", a, b, "shape mismatch");
  std::vector<double> out(a.numel());
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_result("mul", a.shape(), std::move(out), {a, b}, [a, b](const detail::TensorData& o) mutable {
    if (a.requires_grad()) {
      auto g = a.grad_buffer();
      auto bv = b.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto g = b.grad_buffer();
      auto av = a.values();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  return make_op_result("scale", a.shape(), std::move(out), {a},
                        [a, factor](const detail::TensorData& o) mutable { accumulate(a, o.grad, factor); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  if (a.dim(1) != b.dim(0)) shape_fail("matmul", a, b, "inner dimensions differ");
  const auto n = static_cast<Eigen::Index>(a.dim(0)), k = static_cast<Eigen::Index>(a.dim(1)),
             m = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(n * m));
  Map(out.data(), n, m).noalias() = MapC(a.values().data(), n, k) * MapC(b.values().data(), k, m);
  return make_op_result("matmul", {a.dim(0), b.dim(1)}, std::move(out), {a, b},
                        [a, b, n, k, m](const detail::TensorData& o) mutable {
                          MapC g(o.grad.data(), n, m);
                          if (a.requires_grad())
                            Map(a.grad_buffer().data(), n, k).noalias() += g * MapC(b.values().data(), k, m).transpose();
                          if (b.requires_grad())
                            Map(b.grad_buffer().data(), k, m).noalias() += MapC(a.values().data(), n, k).transpose() * g;
                        });
}

Tensor transpose(const Tensor& a) {
  require_2d("transpose", a);
  const auto r = static_cast<Eigen::Index>(a.dim(0)), c = static_cast<Eigen::Index>(a.dim(1));
  std::vector<double> out(a.numel());
  Map(out.data(), c, r) = MapC(a.values().data(), r, c).transpose();
  return make_op_result("transpose", {a.dim(1), a.dim(0)}, std::move(out), {a},
                        [a, r, c](const detail::TensorData& o) mutable {
                          if (a.requires_grad())
                            Map(a.grad_buffer().data(), r, c) += MapC(o.grad.data(), c, r).transpose();
                        });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  require_2d("linear", x);
  require_2d("linear", weight);
  if (x.dim(1) != weight.dim(1)) shape_fail("linear", x, weight, "input width differs from weight columns");
  if (bias != nullptr && (bias->ndim() != 1 || bias->dim(0) != weight.dim(0)))
    shape_fail("linear", weight, *bias, "bias does not match weight rows");
  const auto n = static_cast<Eigen::Index>(x.dim(0)), in = static_cast<Eigen::Index>(x.dim(1)),
             out_w = static_cast<Eigen::Index>(weight.dim(0));
  std::vector<double> out(static_cast<std::size_t>(n * out_w));
  Map y(out.data(), n, out_w);
  y.noalias() = MapC(x.values().data(), n, in) * MapC(weight.values().data(), out_w, in).transpose();
  Tensor b = bias != nullptr ? *bias : Tensor();
  if (bias != nullptr) {
    Eigen::Map<const Eigen::RowVectorXd> bv(bias->values().data(), out_w);
    y.rowwise() += bv;
  }
  std::vector<Tensor> inputs{x, weight};
  if (bias != nullptr) inputs.push_back(*bias);
  return make_op_result("linear", {x.dim(0), weight.dim(0)}, std::move(out), std::move(inputs),
                        [x, weight, b, n, in, out_w](const detail::TensorData& o) mutable {
                          MapC g(o.grad.data(), n, out_w);
                          if (x.requires_grad())
                            Map(x.grad_buffer().data(), n, in).noalias() += g * MapC(weight.values().data(), out_w, in);
                          if (weight.requires_grad())
                            Map(weight.grad_buffer().data(), out_w, in).noalias() +=
                                g.transpose() * MapC(x.values().data(), n, in);
                          if (b.defined() && b.requires_grad())
                            Eigen::Map<Eigen::RowVectorXd>(b.grad_buffer().data(), out_w) += g.colwise().sum();
                        });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.ndim() != first.size()) shape_fail("concat", parts[0], p, "rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d)
      if (d != axis && p.dim(d) != first[d]) shape_fail("concat", parts[0], p, "non-concat axis differs");
    out_shape[axis] += p.dim(axis);
  }
  const auto split = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t chunk = p.dim(axis) * split.inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < split.outer; ++o)
      std::copy_n(pv.begin() + o * chunk, chunk, out.begin() + o * split.len * split.inner + off * split.inner);
    off += p.dim(axis);
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op_result("concat", out_shape, std::move(out), inputs,
                        [inputs, offsets, split, axis](const detail::TensorData& o) mutable {
                          for (std::size_t i = 0; i < inputs.size(); ++i) {
                            auto& p = inputs[i];
                            if (!p.requires_grad()) continue;
                            const std::size_t chunk = p.dim(axis) * split.inner;
                            auto g = p.grad_buffer();
                            for (std::size_t r = 0; r < split.outer; ++r) {
                              const double* src = o.grad.data() + r * split.len * split.inner + offsets[i] * split.inner;
                              for (std::size_t j = 0; j < chunk; ++j) g[r * chunk + j] += src[j];
                            }
                          }
                        });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.ndim()) throw ShapeError("slice: axis out of range for " + shape_str(a.shape()));
  if (begin >= end || end > a.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                     shape_str(a.shape()));
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const auto split = split_axis(a.shape(), axis);
  const std::size_t chunk = (end - begin) * split.inner;
  std::vector<double> out(shape_numel(out_shape));
  auto av = a.values();
  for (std::size_t o = 0; o < split.outer; ++o)
    std::copy_n(av.begin() + (o * split.len + begin) * split.inner, chunk, out.begin() + o * chunk);
  return make_op_result("slice", out_shape, std::move(out), {a},
                        [a, split, begin, chunk](const detail::TensorData& o) mutable {
                          if (!a.requires_grad()) return;
                          auto g = a.grad_buffer();
                          for (std::size_t r = 0; r < split.outer; ++r) {
                            double* dst = g.data() + (r * split.len + begin) * split.inner;
                            for (std::size_t j = 0; j < chunk; ++j) dst[j] += o.grad[r * chunk + j];
                          }
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_op_result("reshape", std::move(shape), std::move(out), {a},
                        [a](const detail::TensorData& o) mutable { accumulate(a, o.grad); });
}

Tensor select_rows(const Tensor& a, std::span<const std::size_t> indices) {
  require_2d("select_rows", a);
  if (indices.empty()) throw ShapeError("select_rows: empty index list");
  const std::size_t cols = a.dim(1);
  std::vector<double> out(indices.size() * cols);
  auto av = a.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= a.dim(0)) throw ShapeError("select_rows: row index out of range for " + shape_str(a.shape()));
    std::copy_n(av.begin() + indices[i] * cols, cols, out.begin() + i * cols);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op_result("select_rows", {indices.size(), cols}, std::move(out), {a},
                        [a, idx, cols](const detail::TensorData& o) mutable {
                          if (!a.requires_grad()) return;
                          auto g = a.grad_buffer();
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            for (std::size_t c = 0; c < cols; ++c) g[idx[i] * cols + c] += o.grad[i * cols + c];
                        });
}

Tensor pick(const Tensor& a, std::span<const std::size_t> indices) {
  require_2d("pick", a);
  if (indices.size() != a.dim(0))
    throw ShapeError("pick: " + std::to_string(indices.size()) + " indices for " + shape_str(a.shape()));
  const std::size_t cols = a.dim(1);
  std::vector<double> out(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= cols) throw ShapeError("pick: column index out of range for " + shape_str(a.shape()));
    out[r] = a.values()[r * cols + indices[r]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_op_result("pick", {indices.size()}, std::move(out), {a},
                        [a, idx, cols](const detail::TensorData& o) mutable {
                          if (!a.requires_grad()) return;
                          auto g = a.grad_buffer();
                          for (std::size_t r = 0; r < idx.size(); ++r) g[r * cols + idx[r]] += o.grad[r];
                        });
}

Tensor sum(const Tensor& a) {
  auto av = a.values();
  const double s = std::accumulate(av.begin(), av.end(), 0.0);
  return make_op_result("sum", {1}, {s}, {a}, [a](const detail::TensorData& o) mutable {
    if (!a.requires_grad()) return;
    for (auto& g : a.grad_buffer()) g += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  auto av = a.values();
  const double n = static_cast<double>(a.numel());
  const double s = std::accumulate(av.begin(), av.end(), 0.0) / n;
  return make_op_result("mean", {1}, {s}, {a}, [a, n](const detail::TensorData& o) mutable {
    if (!a.requires_grad()) return;
    for (auto& g : a.grad_buffer()) g += o.grad[0] / n;
  });
}

Tensor row_sum(const Tensor& a) {
  require_2d("row_sum", a);
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  std::vector<double> out(rows, 0.0);
  auto av = a.values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += av[r * cols + c];
  return make_op_result("row_sum", {rows}, std::move(out), {a}, [a, rows, cols](const detail::TensorData& o) mutable {
    if (!a.requires_grad()) return;
    auto g = a.grad_buffer();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += o.grad[r];
  });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  std::vector<double> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : negative_slope * av[i];
  return make_op_result("leaky_relu", a.shape(), std::move(out), {a},
                        [a, negative_slope](const detail::TensorData& o) mutable {
                          if (!a.requires_grad()) return;
                          auto g = a.grad_buffer();
                          auto av = a.values();
                          for (std::size_t i = 0; i < g.size(); ++i)
                            g[i] += o.grad[i] * (av[i] > 0.0 ? 1.0 : negative_slope);
                        });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    // Branch keeps exp() from overflowing for large |x|.
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return make_op_result("sigmoid", a.shape(), std::move(out), {a}, [a](const detail::TensorData& o) mutable {
    if (!a.requires_grad()) return;
    auto g = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * o.values[i] * (1.0 - o.values[i]);
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.numel());
  auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return make_op_result("tanh", a.shape(), std::move(out), {a}, [a](const detail::TensorData& o) mutable {
    if (!a.requires_grad()) return;
    auto g = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * (1.0 - o.values[i] * o.values[i]);
  });
}

namespace {

// Stable log-sum-exp based softmax along one axis.
std::vector<double> softmax_values(const Tensor& a, const AxisSplit& s, bool log_space) {
  std::vector<double> out(a.numel());
  auto av = a.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double mx = av[base];
      for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, av[base + k * s.inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < s.len; ++k) z += std::exp(av[base + k * s.inner] - mx);
      const double log_z = mx + std::log(z);
      for (std::size_t k = 0; k < s.len; ++k) {
        const double lv = av[base + k * s.inner] - log_z;
        out[base + k * s.inner] = log_space ? lv : std::exp(lv);
      }
    }
  }
  return out;
}

void check_axis(const char* op, const Tensor& a, std::size_t axis) {
  if (axis >= a.ndim()) throw ShapeError(std::string(op) + ": axis out of range for " + shape_str(a.shape()));
}

}  // namespace

Tensor softmax(const Tensor& a, std::size_t axis) {
  check_axis("softmax", a, axis);
  const auto s = split_axis(a.shape(), axis);
  return make_op_result("softmax", a.shape(), softmax_values(a, s, false), {a},
                        [a, s](const detail::TensorData& o) mutable {
                          if (!a.requires_grad()) return;
                          auto g = a.grad_buffer();
                          for (std::size_t ou = 0; ou < s.outer; ++ou) {
                            for (std::size_t in = 0; in < s.inner; ++in) {
                              const std::size_t base = ou * s.len * s.inner + in;
                              double dot = 0.0;
                              for (std::size_t k = 0; k < s.len; ++k)
                                dot += o.grad[base + k * s.inner] * o.values[base + k * s.inner];
                              for (std::size_t k = 0; k < s.len; ++k) {
                                const std::size_t i = base + k * s.inner;
                                g[i] += o.values[i] * (o.grad[i] - dot);
                              }
                            }
                          }
                        });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  check_axis("log_softmax", a, axis);
  const auto s = split_axis(a.shape(), axis);
  return make_op_result("log_softmax", a.shape(), softmax_values(a, s, true), {a},
                        [a, s](const detail::TensorData& o) mutable {
                          if (!a.requires_grad()) return;
                          auto g = a.grad_buffer();
                          for (std::size_t ou = 0; ou < s.outer; ++ou) {
                            for (std::size_t in = 0; in < s.inner; ++in) {
                              const std::size_t base = ou * s.len * s.inner + in;
                              double total = 0.0;
                              for (std::size_t k = 0; k < s.len; ++k) total += o.grad[base + k * s.inner];
                              for (std::size_t k = 0; k < s.len; ++k) {
                                const std::size_t i = base + k * s.inner;
                                g[i] += o.grad[i] - std::exp(o.values[i]) * total;
                              }
                            }
                          }
                        });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) shape_fail("mse", prediction, target, "shape mismatch");
  const std::size_t n = prediction.numel();
  auto pv = prediction.values(), tv = target.values();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (pv[i] - tv[i]) * (pv[i] - tv[i]);
  s /= static_cast<double>(n);
  return make_op_result("mse", {1}, {s}, {prediction, target},
                        [prediction, target, n](const detail::TensorData& o) mutable {
                          const double k = 2.0 * o.grad[0] / static_cast<double>(n);
                          auto pv = prediction.values(), tv = target.values();
                          if (prediction.requires_grad()) {
                            auto g = prediction.grad_buffer();
                            for (std::size_t i = 0; i < n; ++i) g[i] += k * (pv[i] - tv[i]);
                          }
                          if (target.requires_grad()) {
                            auto g = target.grad_buffer();
                            for (std::size_t i = 0; i < n; ++i) g[i] -= k * (pv[i] - tv[i]);
                          }
                        });
}

}  // namespace bepal::num
