#pragma once

#include <span>
#include <vector>

#include "bepal/tensor.hpp"

namespace bepal::num {

struct RmspropConfig {
  double learning_rate = 1e-3;
  double smoothing = 0.97;
  double epsilon = 1e-8;
};

/// Running mean of squared gradients, one buffer per parameter.
struct RmspropState {
  RmspropConfig config;
  std::vector<std::vector<double>> mean_square;

  static RmspropState for_params(std::span<const Tensor> params, RmspropConfig config);
};

/// Non-centered RMSprop:
///   v <- a*v + (1-a)*g^2
///   w <- w - lr * g / (sqrt(v) + eps)
/// A parameter without a gradient is treated as g = 0. All gradients are
/// validated before any parameter or accumulator is touched.
void rmsprop_step(std::span<Tensor> params, RmspropState& state);

/// Global L2 norm over the parameters' gradients.
double grad_norm(std::span<const Tensor> params);
void scale_grads(std::span<Tensor> params, double factor);
void zero_grads(std::span<Tensor> params);

}  // namespace bepal::num
