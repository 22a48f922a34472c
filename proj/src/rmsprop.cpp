#include "bepal/rmsprop.hpp"

#include <cmath>
#include <string>

#include "bepal/error.hpp"

namespace bepal::num {

RmspropState RmspropState::for_params(std::span<const Tensor> params, RmspropConfig config) {
  RmspropState s;
  s.config = config;
  s.mean_square.reserve(params.size());
  for (const auto& p : params) s.mean_square.emplace_back(p.numel(), 0.0);
  return s;
}

void rmsprop_step(std::span<Tensor> params, RmspropState& state) {
  if (params.size() != state.mean_square.size())
    throw ShapeError("rmsprop_step: " + std::to_string(params.size()) + " params but state holds " +
                     std::to_string(state.mean_square.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != state.mean_square[i].size())
      throw ShapeError("rmsprop_step: state size mismatch for parameter " + std::to_string(i) + " of shape " +
                       shape_str(params[i].shape()));
    if (params[i].has_grad()) check_finite("rmsprop_step gradient", params[i].grad());
  }
  const auto& c = state.config;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.mean_square[i];
    auto w = params[i].mutable_values();
    if (!params[i].has_grad()) {
      for (auto& x : v) x *= c.smoothing;
      continue;
    }
    auto g = params[i].grad();
    for (std::size_t k = 0; k < w.size(); ++k) {
      v[k] = c.smoothing * v[k] + (1.0 - c.smoothing) * g[k] * g[k];
      w[k] -= c.learning_rate * g[k] / (std::sqrt(v[k]) + c.epsilon);
    }
  }
}

double grad_norm(std::span<const Tensor> params) {
  double s = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) s += g * g;
  return std::sqrt(s);
}

void scale_grads(std::span<Tensor> params, double factor) {
  for (auto& p : params)
    if (p.has_grad())
      for (auto& g : p.grad_buffer()) g *= factor;
}

void zero_grads(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace bepal::num
