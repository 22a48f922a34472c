#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bepal/nn.hpp"
#include "bepal/ops.hpp"
#include "bepal/tensor.hpp"
#include "oracles.hpp"

namespace gradcheck {

using bepal::num::Shape;
using bepal::num::Tensor;
using OpFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct OpCase {
  std::string name;
  std::vector<Shape> input_shapes;
  OpFn op;
  /// Inputs are drawn from U[lo, hi]; with `avoid_zero` entries closer than
  /// 0.05 to zero are pushed away from kinks.
  double lo = -1.5, hi = 1.5;
  bool avoid_zero = false;
};

inline std::vector<Tensor> random_inputs(const OpCase& c, std::mt19937_64& gen, bool requires_grad) {
  std::uniform_real_distribution<double> u(c.lo, c.hi);
  std::vector<Tensor> in;
  for (const auto& s : c.input_shapes) {
    std::vector<double> v(bepal::num::shape_numel(s));
    for (auto& x : v) {
      x = u(gen);
      if (c.avoid_zero && std::abs(x) < 0.05) x = x < 0 ? x - 0.05 : x + 0.05;
    }
    in.push_back(Tensor::from(s, std::move(v), requires_grad));
  }
  return in;
}

/// Projects the op output onto fixed random weights so every output entry
/// contributes to the checked scalar.
inline double weighted_sum(const Tensor& out, const std::vector<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += w[i] * out.values()[i];
  return s;
}

/// Worst relative error between tape gradients and central differences
/// over every input entry of one random instance.
inline double check_once(const OpCase& c, std::mt19937_64& gen) {
  auto inputs = random_inputs(c, gen, true);
  std::vector<double> w;
  {
    const Tensor probe = c.op(inputs);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    w.resize(probe.numel());
    for (auto& x : w) x = u(gen);
  }
  bepal::num::Tape tape;
  {
    bepal::num::Tape::Scope scope(tape);
    const Tensor out = c.op(inputs);
    const Tensor loss = bepal::num::sum(bepal::num::mul(out, Tensor::from(out.shape(), w)));
    tape.backward(loss);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> x(inputs[k].values().begin(), inputs[k].values().end());
    auto f = [&](const oracle::Vec& xv) {
      std::vector<Tensor> perturbed;
      for (std::size_t j = 0; j < inputs.size(); ++j)
        perturbed.push_back(j == k ? Tensor::from(inputs[j].shape(), xv) : inputs[j].detach());
      return weighted_sum(c.op(perturbed), w);
    };
    const auto numeric = oracle::finite_difference(f, x);
    std::vector<double> analytic(x.size(), 0.0);
    if (inputs[k].has_grad()) analytic.assign(inputs[k].grad().begin(), inputs[k].grad().end());
    worst = std::max(worst, oracle::max_rel_error(analytic, numeric));
  }
  return worst;
}

/// One representative case per differentiable op.
inline std::vector<OpCase> op_cases() {
  namespace N = bepal::num;
  std::vector<OpCase> cs;
  cs.push_back({"add", {{3, 4}, {3, 4}}, [](const auto& in) { return N::add(in[0], in[1]); }});
  cs.push_back({"add_row_bias", {{3, 4}, {4}}, [](const auto& in) { return N::add(in[0], in[1]); }});
  cs.push_back({"sub", {{2, 5}, {2, 5}}, [](const auto& in) { return N::sub(in[0], in[1]); }});
  cs.push_back({"mul", {{3, 3}, {3, 3}}, [](const auto& in) { return N::mul(in[0], in[1]); }});
  cs.push_back({"scale", {{4, 2}}, [](const auto& in) { return N::scale(in[0], -1.7); }});
  cs.push_back({"matmul", {{3, 4}, {4, 2}}, [](const auto& in) { return N::matmul(in[0], in[1]); }});
  cs.push_back({"transpose", {{2, 3}}, [](const auto& in) { return N::transpose(in[0]); }});
  cs.push_back({"linear", {{3, 4}, {5, 4}, {5}}, [](const auto& in) { return N::linear(in[0], in[1], &in[2]); }});
  cs.push_back({"linear_nobias", {{2, 3}, {4, 3}}, [](const auto& in) { return N::linear(in[0], in[1], nullptr); }});
  cs.push_back({"concat_rows", {{2, 3}, {1, 3}}, [](const auto& in) { return N::concat(in, 0); }});
  cs.push_back({"concat_cols", {{2, 3}, {2, 2}}, [](const auto& in) { return N::concat(in, 1); }});
  cs.push_back({"slice", {{3, 6}}, [](const auto& in) { return N::slice(in[0], 1, 1, 4); }});
  cs.push_back({"reshape", {{2, 6}}, [](const auto& in) { return N::reshape(in[0], {3, 4}); }});
  cs.push_back({"select_rows", {{4, 3}}, [](const auto& in) {
                  const std::vector<std::size_t> idx{2, 0, 2};
                  return N::select_rows(in[0], idx);
                }});
  cs.push_back({"pick", {{3, 5}}, [](const auto& in) {
                  const std::vector<std::size_t> idx{4, 0, 2};
                  return N::pick(in[0], idx);
                }});
  cs.push_back({"sum", {{3, 4}}, [](const auto& in) { return N::sum(in[0]); }});
  cs.push_back({"mean", {{3, 4}}, [](const auto& in) { return N::mean(in[0]); }});
  cs.push_back({"row_sum", {{3, 4}}, [](const auto& in) { return N::row_sum(in[0]); }});
  OpCase lr{"leaky_relu", {{4, 4}}, [](const auto& in) { return N::leaky_relu(in[0], 0.01); }};
  lr.avoid_zero = true;
  cs.push_back(lr);
  cs.push_back({"sigmoid", {{3, 4}}, [](const auto& in) { return N::sigmoid(in[0]); }, -4.0, 4.0});
  cs.push_back({"tanh", {{3, 4}}, [](const auto& in) { return N::tanh(in[0]); }, -2.0, 2.0});
  cs.push_back({"softmax_rows", {{3, 5}}, [](const auto& in) { return N::softmax(in[0], 1); }, -3.0, 3.0});
  cs.push_back({"softmax_cols", {{4, 3}}, [](const auto& in) { return N::softmax(in[0], 0); }, -3.0, 3.0});
  cs.push_back({"log_softmax", {{3, 5}}, [](const auto& in) { return N::log_softmax(in[0], 1); }, -3.0, 3.0});
  cs.push_back({"mse", {{3, 4}, {3, 4}}, [](const auto& in) { return N::mse(in[0], in[1]); }});
  cs.push_back({"star_attention", {{7, 3}, {6}}, [](const auto& in) {
                  const std::vector<std::size_t> offsets{0, 4, 5, 7};
                  return bepal::nn::star_attention(in[0], in[1], offsets, 0.2);
                }});
  return cs;
}

}  // namespace gradcheck
