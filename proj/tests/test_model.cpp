#include <cmath>
#include <random>
#include <set>

#include "bepal/error.hpp"
#include "bepal/model.hpp"
#include "bepal/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bepal;
using num::Tensor;

namespace {

model::ModelDims small_dims(std::size_t n) {
  model::ModelDims d;
  d.n_agents = n;
  d.gat_heads = 2;
  d.gat_head_dim = 4;
  d.hidden = 8;
  d.key_dim = 3;
  d.motion_hidden = 5;
  return d;
}

std::vector<ObservationGraph> team_graphs(std::uint64_t seed, int n = 3) {
  env::EnvConfig c;
  c.map_size = 5;
  c.n_agents = n;
  c.n_obstacles = 3;
  env::PredatorPrey e(c);
  return e.reset(seed);
}

oracle::Vec affine(const nn::Linear& l, const oracle::Vec& x) {
  auto y = oracle::matvec(oracle::to_mat(l.weight), x);
  if (l.has_bias())
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += l.bias[i];
  return y;
}

oracle::Mat layer_oracle(const nn::GatLayer& layer, const oracle::Mat& feats) {
  std::vector<oracle::Mat> ws;
  std::vector<oracle::Vec> as;
  for (const auto& h : layer.heads) {
    ws.push_back(oracle::to_mat(h.weight));
    as.emplace_back(h.attn.values().begin(), h.attn.values().end());
  }
  return oracle::gat_layer(feats, ws, as, layer.negative_slope);
}

}  // namespace

TEST_CASE("default dimensions produce the documented layer shapes") {
  nn::ParamInit init(1);
  const auto p = model::BepalParams::create(model::ModelDims{}, init);
  CHECK(p.gat1.out_features() == 96);
  CHECK(p.gat2.out_features() == 128);
  CHECK(p.post_gat.weight.shape() == num::Shape{128, 128});
  CHECK(p.msg_query.weight.shape() == num::Shape{16, 128});
  CHECK_FALSE(p.msg_query.has_bias());
  CHECK(p.msg_value.weight.shape() == num::Shape{128, 128});
  CHECK(p.lstm.gates.weight.shape() == num::Shape{512, 256});
  CHECK(p.actor_move.out_features() == 5);
  CHECK(p.actor_gate.out_features() == 2);
  CHECK(p.critic.out_features() == 1);
  CHECK(p.reward_head.out_features() == 3);
  CHECK(p.motion_hidden.out_features() == 64);
  CHECK(p.motion_out.out_features() == 16);
}

TEST_CASE("parameter names are unique and the count depends only on dimensions") {
  nn::ParamInit a(1), b(2);
  const auto p = model::BepalParams::create(model::ModelDims{}, a);
  const auto q = model::BepalParams::create(model::ModelDims{}, b);
  CHECK(p.parameter_count() == q.parameter_count());
  std::set<std::string> names;
  for (const auto& [n, t] : p.named_parameters()) names.insert(n);
  CHECK(names.size() == p.named_parameters().size());
  const auto pn = p.named_parameters(), qn = q.named_parameters();
  for (std::size_t i = 0; i < pn.size(); ++i) CHECK(pn[i].first == qn[i].first);
  CHECK(p.parameters().size() == pn.size());
}

TEST_CASE("encoder matches two composed GAT oracles and the affine projection") {
  nn::ParamInit init(3);
  const auto dims = small_dims(1);
  const auto p = model::BepalParams::create(dims, init);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::Mat f(3, oracle::Vec(dims.feature_dim));
    for (auto& row : f)
      for (auto& x : row) x = u(gen);
    const std::vector<ObservationGraph> g{ObservationGraph::star(f)};
    const Tensor e = model::encode_observation(p, g);
    const auto want = affine(p.post_gat, layer_oracle(p.gat2, layer_oracle(p.gat1, f))[0]);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(e[i] - want[i]) <= 1e-10);
  }
}

TEST_CASE("encoder output ignores the order of leaf nodes") {
  nn::ParamInit init(4);
  const auto p = model::BepalParams::create(small_dims(1), init);
  std::vector<std::vector<double>> f(4, std::vector<double>(env::kFeatureDim));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < env::kFeatureDim; ++c) f[r][c] = std::sin(1.0 + r * 3.0 + c);
  auto g = f;
  std::swap(g[1], g[3]);
  const Tensor a = model::encode_observation(p, std::vector<ObservationGraph>{ObservationGraph::star(f)});
  const Tensor b = model::encode_observation(p, std::vector<ObservationGraph>{ObservationGraph::star(g)});
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
}

TEST_CASE("message aggregation edge cases") {
  nn::ParamInit init(5);
  const auto dims = small_dims(3);
  const auto p = model::BepalParams::create(dims, init);
  const Tensor h = Tensor::full({3, dims.hidden}, 0.4);
  const Tensor zero = model::aggregate_messages(p, h, Tensor::zeros({3, dims.hidden}));
  for (double v : zero.values()) CHECK(v == 0.0);

  std::vector<double> msg(dims.hidden);
  for (std::size_t i = 0; i < msg.size(); ++i) msg[i] = 0.1 * static_cast<double>(i) - 0.3;
  std::vector<double> tiled;
  for (int k = 0; k < 3; ++k) tiled.insert(tiled.end(), msg.begin(), msg.end());
  const Tensor c = model::aggregate_messages(p, h, Tensor::from({3, dims.hidden}, tiled));
  const auto want = affine(p.msg_value, msg);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t i = 0; i < dims.hidden; ++i) CHECK(c.at(b, i) == doctest::Approx(want[i]).epsilon(1e-12));

  CHECK_THROWS_AS(model::aggregate_messages(p, h, Tensor::zeros({2, dims.hidden})), ShapeError);
}

TEST_CASE("zero parameters give uniform policies and empty beliefs") {
  nn::ParamInit zero = nn::ParamInit::zeros();
  const auto dims = small_dims(3);
  const auto p = model::BepalParams::create(dims, zero);
  const auto out = model::step_team(p, model::TeamState::initial(dims), team_graphs(1), model::greedy_policy(), true);
  for (double v : out.move_probs.values()) CHECK(v == 0.2);
  for (double v : out.gate_probs.values()) CHECK(v == 0.5);
  for (double v : out.beliefs->reward.values()) CHECK(v == 0.0);
  for (double v : out.beliefs->motion.values()) CHECK(v == 0.0);
}

TEST_CASE("belief shapes follow the team size") {
  nn::ParamInit init(6);
  auto dims = small_dims(5);
  const auto p = model::BepalParams::create(dims, init);
  const auto b = model::decode_beliefs(p, Tensor::full({5, dims.hidden}, 0.1));
  CHECK(b.reward.shape() == num::Shape{5, 5});
  CHECK(b.motion.shape() == num::Shape{5, 24});
  const auto m = model::motion_matrix(b.motion, 2, 5);
  CHECK(m.size() == 6);
  CHECK(m[5][3] == b.motion.at(2, 23));
  CHECK(m[1][0] == b.motion.at(2, 4));
}

TEST_CASE("policy distributions are normalized and messages are gated") {
  nn::ParamInit init(7);
  const auto dims = small_dims(3);
  const auto p = model::BepalParams::create(dims, init);
  Rng rng(9);
  auto state = model::TeamState::initial(dims);
  for (std::uint64_t t = 0; t < 10; ++t) {
    const auto out = model::step_team(p, state, team_graphs(t), model::sampling_policy(rng), false);
    for (std::size_t i = 0; i < 3; ++i) {
      double sm = 0.0, sg = 0.0;
      for (std::size_t k = 0; k < 5; ++k) sm += std::exp(out.move_logp.at(i, k));
      for (std::size_t k = 0; k < 2; ++k) sg += std::exp(out.gate_logp.at(i, k));
      CHECK(std::abs(sm - 1.0) <= 1e-10);
      CHECK(std::abs(sg - 1.0) <= 1e-10);
      for (std::size_t k = 0; k < dims.hidden; ++k) {
        const double want = out.actions.gates[i] == 1 ? out.next.hidden.at(i, k) : 0.0;
        CHECK(out.next.inbox.at(i, k) == want);
      }
    }
    CHECK_FALSE(out.beliefs.has_value());
    state = out.next;
  }
}

TEST_CASE("messages arrive with a one-step delay") {
  nn::ParamInit init(8);
  const auto dims = small_dims(3);
  const auto p = model::BepalParams::create(dims, init);
  const auto g = team_graphs(2);
  auto all_on = model::scripted_policy({{{4, 4, 4}, {1, 1, 1}}, {{4, 4, 4}, {1, 1, 1}}});
  const auto first = model::step_team(p, model::TeamState::initial(dims), g, all_on, false);
  // Step 0 sees a zero inbox, so the message term is zero.
  const Tensor e0 = model::encode_observation(p, g);
  auto [h0, s0] = p.lstm.step(e0, Tensor::zeros({3, dims.hidden}), Tensor::zeros({3, dims.hidden}));
  for (std::size_t i = 0; i < h0.numel(); ++i) CHECK(first.next.hidden[i] == h0[i]);
  // Step 1 fuses exactly the messages emitted at step 0.
  const auto second = model::step_team(p, first.next, g, all_on, false);
  const Tensor c1 = model::aggregate_messages(p, first.next.hidden, first.next.inbox);
  auto [h1, s1] = p.lstm.step(num::add(e0, c1), first.next.hidden, first.next.cell);
  for (std::size_t i = 0; i < h1.numel(); ++i) CHECK(second.next.hidden[i] == h1[i]);
}

TEST_CASE("decoding beliefs leaves the action distribution untouched") {
  nn::ParamInit init(9);
  const auto dims = small_dims(3);
  const auto p = model::BepalParams::create(dims, init);
  const auto g = team_graphs(4);
  const auto a = model::step_team(p, model::TeamState::initial(dims), g, model::greedy_policy(), true);
  const auto b = model::step_team(p, model::TeamState::initial(dims), g, model::greedy_policy(), false);
  for (std::size_t i = 0; i < a.move_probs.numel(); ++i) CHECK(a.move_probs[i] == b.move_probs[i]);
  for (std::size_t i = 0; i < a.gate_probs.numel(); ++i) CHECK(a.gate_probs[i] == b.gate_probs[i]);
}

TEST_CASE("sampling is reproducible under a fixed seed") {
  nn::ParamInit init(10);
  const auto dims = small_dims(3);
  const auto p = model::BepalParams::create(dims, init);
  auto run = [&](std::uint64_t seed) {
    Rng rng(seed);
    auto state = model::TeamState::initial(dims);
    std::vector<std::size_t> trace;
    for (std::uint64_t t = 0; t < 8; ++t) {
      const auto out = model::step_team(p, state, team_graphs(t), model::sampling_policy(rng), false);
      trace.insert(trace.end(), out.actions.moves.begin(), out.actions.moves.end());
      trace.insert(trace.end(), out.actions.gates.begin(), out.actions.gates.end());
      state = out.next;
    }
    return trace;
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}

TEST_CASE("greedy and scripted policies") {
  const Tensor mp = Tensor::from({2, 5}, {0.1, 0.5, 0.1, 0.2, 0.1, 0.3, 0.1, 0.1, 0.1, 0.4});
  const Tensor gp = Tensor::from({2, 2}, {0.2, 0.8, 0.9, 0.1});
  const auto c = model::greedy_policy()(mp, gp);
  CHECK(c.moves == std::vector<std::size_t>{1, 4});
  CHECK(c.gates == std::vector<std::size_t>{1, 0});
  auto s = model::scripted_policy({{{0, 1}, {1, 1}}});
  CHECK(s(mp, gp).moves == std::vector<std::size_t>{0, 1});
  CHECK_THROWS_AS(s(mp, gp), std::out_of_range);
}

TEST_CASE("sampling frequencies follow the policy") {
  const Tensor mp = Tensor::from({1, 5}, {0.1, 0.2, 0.3, 0.15, 0.25});
  const Tensor gp = Tensor::from({1, 2}, {0.7, 0.3});
  Rng rng(11);
  const auto policy = model::sampling_policy(rng);
  std::vector<double> counts(5, 0.0);
  double gate_on = 0.0;
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    const auto c = policy(mp, gp);
    counts[c.moves[0]] += 1.0;
    gate_on += static_cast<double>(c.gates[0]);
  }
  for (std::size_t k = 0; k < 5; ++k) {
    const double p = mp[k], sd = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(counts[k] / n - p) < 5 * sd);
  }
  CHECK(std::abs(gate_on / n - 0.3) < 5 * std::sqrt(0.21 / n));
}

TEST_CASE("motion decoder gradient matches central differences") {
  nn::ParamInit init(12);
  const auto dims = small_dims(2);
  const auto p = model::BepalParams::create(dims, init);
  std::vector<double> hv(2 * dims.hidden), tv(2 * dims.motion_width());
  for (std::size_t i = 0; i < hv.size(); ++i) hv[i] = std::cos(0.7 * static_cast<double>(i));
  for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = std::sin(0.3 * static_cast<double>(i));
  const Tensor h = Tensor::from({2, dims.hidden}, hv), target = Tensor::from({2, dims.motion_width()}, tv);
  auto loss = [&] { return num::mse(model::decode_beliefs(p, h).motion, target); };
  num::Tape tape;
  {
    num::Tape::Scope scope(tape);
    tape.backward(loss());
  }
  Tensor w = p.motion_hidden.weight;
  std::vector<double> analytic(w.grad().begin(), w.grad().end()), x(w.values().begin(), w.values().end());
  const auto numeric = oracle::finite_difference(
      [&](const oracle::Vec& xv) {
        std::copy(xv.begin(), xv.end(), w.mutable_values().begin());
        return loss().item();
      },
      x);
  std::copy(x.begin(), x.end(), w.mutable_values().begin());
  CHECK(oracle::max_rel_error(analytic, numeric) < 1e-6);
}
