#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bepal/tensor.hpp"

// Differentiable ops. Shapes must match exactly except for two
// broadcasts: scalar-times-tensor (scale) and adding a 1-D bias of width C
// to every row of an (R, C) tensor.
namespace bepal::num {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

/// (n, k) x (k, m) -> (n, m)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// x (n, in) with weight (out, in) and optional bias (out) -> (n, out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor* bias);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& a, Shape shape);
/// Rows `indices` of a 2-D tensor, in order.
Tensor select_rows(const Tensor& a, std::span<const std::size_t> indices);
/// out[r] = a[r, indices[r]] for a 2-D tensor.
Tensor pick(const Tensor& a, std::span<const std::size_t> indices);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Sum over the last axis of a 2-D tensor: (r, c) -> (r).
Tensor row_sum(const Tensor& a);

Tensor leaky_relu(const Tensor& a, double negative_slope);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

/// Mean of squared differences over all entries.
Tensor mse(const Tensor& prediction, const Tensor& target);

}  // namespace bepal::num
