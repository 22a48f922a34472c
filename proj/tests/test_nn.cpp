#include <cmath>
#include <random>

#include "bepal/error.hpp"
#include "bepal/nn.hpp"
#include "bepal/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bepal;
using num::Tensor;

namespace {

std::vector<ObservationGraph> random_graphs(std::mt19937_64& gen, std::size_t n_graphs, std::size_t width) {
  std::uniform_int_distribution<int> nodes(1, 5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<ObservationGraph> gs;
  for (std::size_t g = 0; g < n_graphs; ++g) {
    std::vector<std::vector<double>> f(static_cast<std::size_t>(nodes(gen)), std::vector<double>(width));
    for (auto& row : f)
      for (auto& x : row) x = u(gen);
    gs.push_back(ObservationGraph::star(f));
  }
  return gs;
}

oracle::Mat graph_mat(const ObservationGraph& g) { return g.node_features; }

}  // namespace

TEST_CASE("normalization sets follow the star topology") {
  CHECK(nn::normalization_set(4, 0) == std::vector<std::size_t>{0, 1, 2, 3});
  CHECK(nn::normalization_set(4, 2) == std::vector<std::size_t>{0, 2});
  CHECK(nn::normalization_set(1, 0) == std::vector<std::size_t>{0});
}

TEST_CASE("GAT attention coefficients match the brute-force oracle") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 50; ++trial) {
    nn::ParamInit init(100 + trial);
    const auto layer = nn::GatLayer::create(6, 4, 2, nn::HeadMerge::Concat, 0.2, init);
    const auto g = random_graphs(gen, 1, 6).front();
    const Tensor feats = nn::GraphBatch::from_graphs(std::vector<ObservationGraph>{g}).features;
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        const auto got = nn::gat_attention(layer, h, feats, i);
        const auto want = oracle::gat_coefficients(graph_mat(g), oracle::to_mat(layer.heads[h].weight),
                                                   oracle::to_mat(num::reshape(layer.heads[h].attn, {1, 8}))[0], 0.2, i);
        REQUIRE(got.size() == want.size());
        double s = 0.0;
        for (std::size_t k = 0; k < got.size(); ++k) {
          CHECK(std::abs(got[k] - want[k]) <= 1e-10);
          s += got[k];
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("GAT layer forward matches the brute-force oracle on batched graphs") {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 50; ++trial) {
    nn::ParamInit init(200 + trial);
    const bool concat = trial % 2 == 0;
    const auto layer =
        nn::GatLayer::create(5, 3, concat ? 3 : 1, concat ? nn::HeadMerge::Concat : nn::HeadMerge::Single, 0.01, init);
    const auto gs = random_graphs(gen, 1 + trial % 3, 5);
    const auto batch = nn::GraphBatch::from_graphs(gs);
    const Tensor out = nn::gat_forward(layer, batch);
    CHECK(out.dim(1) == layer.out_features());
    std::vector<oracle::Mat> ws;
    std::vector<oracle::Vec> as;
    for (const auto& h : layer.heads) {
      ws.push_back(oracle::to_mat(h.weight));
      as.emplace_back(h.attn.values().begin(), h.attn.values().end());
    }
    for (std::size_t g = 0; g < gs.size(); ++g) {
      const auto want = oracle::gat_layer(graph_mat(gs[g]), ws, as, 0.01);
      for (std::size_t i = 0; i < want.size(); ++i)
        for (std::size_t c = 0; c < want[i].size(); ++c)
          CHECK(std::abs(out.at(batch.offsets[g] + i, c) - want[i][c]) <= 1e-10);
    }
  }
}

TEST_CASE("a lone center node attends only to itself") {
  nn::ParamInit init(3);
  const auto layer = nn::GatLayer::create(4, 2, 1, nn::HeadMerge::Single, 0.01, init);
  const std::vector<ObservationGraph> g{ObservationGraph::star({{0.5, -0.5, 1.0, 0.0}})};
  const auto batch = nn::GraphBatch::from_graphs(g);
  CHECK(nn::gat_attention(layer, 0, batch.features, 0) == std::vector<double>{1.0});
  const Tensor wf = num::linear(batch.features, layer.heads[0].weight.detach(), nullptr);
  const Tensor out = nn::gat_forward(layer, batch);
  for (std::size_t c = 0; c < 2; ++c) CHECK(out.at(0, c) == doctest::Approx(oracle::leaky(wf.at(0, c), 0.01)));
}

TEST_CASE("graph batches reject non-star edge sets") {
  auto g = ObservationGraph::star({{1.0}, {2.0}, {3.0}});
  g.edges.emplace_back(1, 2);
  CHECK_THROWS_AS(nn::GraphBatch::from_graphs(std::vector<ObservationGraph>{g}), ShapeError);
  auto ragged = ObservationGraph::star({{1.0, 2.0}, {3.0}});
  CHECK_THROWS_AS(nn::GraphBatch::from_graphs(std::vector<ObservationGraph>{ragged}), ShapeError);
}

TEST_CASE("message attention matches scaled dot-product oracle") {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    nn::ParamInit init(300 + trial);
    const std::size_t H = 6, dk = 3, B = 1 + trial % 3, N = 1 + trial % 4;
    const auto wq = nn::Linear::create(H, dk, false, init);
    const auto wk = nn::Linear::create(H, dk, false, init);
    const auto wu = nn::Linear::create(H, H, false, init);
    std::vector<double> qv(B * H), mv(N * H);
    for (auto& x : qv) x = u(gen);
    for (auto& x : mv) x = u(gen);
    const Tensor q = Tensor::from({B, H}, qv), m = Tensor::from({N, H}, mv);
    const Tensor got = nn::message_attention(q, m, wq, wk, wu);
    const auto want = oracle::message_attention(oracle::to_mat(q), oracle::to_mat(m), oracle::to_mat(wq.weight),
                                                oracle::to_mat(wk.weight), oracle::to_mat(wu.weight));
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < H; ++c) CHECK(std::abs(got.at(b, c) - want[b][c]) <= 1e-10);
  }
}

TEST_CASE("all-zero messages give a zero aggregate") {
  nn::ParamInit init(4);
  const auto wq = nn::Linear::create(4, 2, false, init), wk = nn::Linear::create(4, 2, false, init);
  const auto wu = nn::Linear::create(4, 4, false, init);
  const Tensor c = nn::message_attention(Tensor::full({2, 4}, 0.3), Tensor::zeros({3, 4}), wq, wk, wu);
  for (double v : c.values()) CHECK(v == 0.0);
  const Tensor w = nn::message_attention_weights(Tensor::full({2, 4}, 0.3), Tensor::zeros({3, 4}), wq, wk);
  for (double v : w.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("LSTM matches central differences over three steps") {
  nn::ParamInit init(5);
  const std::size_t H = 4;
  const auto cell = nn::LstmCell::create(H, init);
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Tensor> xs;
  for (int t = 0; t < 3; ++t) {
    std::vector<double> v(2 * H);
    for (auto& x : v) x = u(gen);
    xs.push_back(Tensor::from({2, H}, v));
  }
  std::vector<double> readout(2 * H);
  for (auto& x : readout) x = u(gen);
  auto run = [&](const nn::LstmCell& c) {
    Tensor h = Tensor::zeros({2, H}), s = Tensor::zeros({2, H});
    for (const auto& x : xs) std::tie(h, s) = c.step(x, h, s);
    return num::sum(num::mul(num::add(h, s), Tensor::from({2, H}, readout)));
  };
  num::Tape tape;
  {
    num::Tape::Scope scope(tape);
    tape.backward(run(cell));
  }
  for (Tensor p : {cell.gates.weight, cell.gates.bias}) {
    std::vector<double> analytic(p.grad().begin(), p.grad().end());
    std::vector<double> x(p.values().begin(), p.values().end());
    auto f = [&](const oracle::Vec& xv) {
      std::copy(xv.begin(), xv.end(), p.mutable_values().begin());
      return run(cell).item();
    };
    const auto numeric = oracle::finite_difference(f, x);
    std::copy(x.begin(), x.end(), p.mutable_values().begin());
    CHECK(oracle::max_rel_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("LSTM gate order is input, forget, candidate, output") {
  nn::ParamInit zero = nn::ParamInit::zeros();
  auto cell = nn::LstmCell::create(1, zero);
  // Bias only: i = sigmoid(b0), f = sigmoid(b1), g = tanh(b2), o = sigmoid(b3).
  const double b[4] = {0.3, -0.7, 0.9, 1.4};
  for (int k = 0; k < 4; ++k) cell.gates.bias.mutable_values()[k] = b[k];
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const auto [h, s] = cell.step(Tensor::zeros({1, 1}), Tensor::zeros({1, 1}), Tensor::full({1, 1}, 2.0));
  const double s_want = sig(b[1]) * 2.0 + sig(b[0]) * std::tanh(b[2]);
  CHECK(s[0] == doctest::Approx(s_want).epsilon(1e-14));
  CHECK(h[0] == doctest::Approx(sig(b[3]) * std::tanh(s_want)).epsilon(1e-14));
}

TEST_CASE("uniform fan-in initialization stays within bounds and is centered") {
  nn::ParamInit init(6);
  const std::size_t fan_in = 64;
  const Tensor w = init.weight({256, fan_in}, fan_in);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  double mean = 0.0, sq = 0.0;
  for (double v : w.values()) {
    CHECK(std::abs(v) <= bound);
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(w.numel());
  sq /= static_cast<double>(w.numel());
  // For U[-b, b]: mean 0 with std b/sqrt(3n); second moment b^2/3.
  CHECK(std::abs(mean) < 4.0 * bound / std::sqrt(3.0 * static_cast<double>(w.numel())));
  CHECK(sq == doctest::Approx(bound * bound / 3.0).epsilon(0.03));
  CHECK(init.bias(3).values()[1] == 0.0);
}

TEST_CASE("initialization is reproducible per seed") {
  nn::ParamInit a(77), b(77), c(78);
  const Tensor wa = a.weight({3, 3}, 3), wb = b.weight({3, 3}, 3), wc = c.weight({3, 3}, 3);
  for (std::size_t i = 0; i < 9; ++i) CHECK(wa[i] == wb[i]);
  CHECK(wa[0] != wc[0]);
}
