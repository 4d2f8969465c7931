#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mhp/error.hpp"
#include "mhp/lstm.hpp"
#include "mhp/rng.hpp"

using namespace mhp;
using namespace mhp::rnn;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("zero weights and zero state give zero outputs") {
  LstmParams p;
  p.input_dim = 3;
  p.hidden_dim = 5;
  p.weights = Tensor::zeros({8, 20});
  p.bias = Tensor::zeros({20});
  const LstmState out = lstm_step(p, Tensor::vec({0.7, -0.3, 2.0}), LstmState::zero(5));
  for (double v : out.hidden.data) CHECK(v == 0.0);  // o * tanh(0)
  for (double v : out.cell.data) CHECK(v == 0.0);    // 0.5*0 + 0.5*tanh(0)
}

TEST_CASE("output dimensions follow hidden_dim") {
  Rng rng(1);
  const LstmParams p = LstmParams::init(2, 64, rng);
  const LstmState out = lstm_step(p, Tensor::vec({0.1, 0.2}), LstmState::zero(64));
  CHECK(out.hidden.numel() == 64);
  CHECK(out.cell.numel() == 64);
}

TEST_CASE("parameter count is 4*h*(in+h+1)") {
  Rng rng(2);
  const LstmParams p = LstmParams::init(3, 7, rng);
  CHECK(p.parameter_count() == 4u * 7u * (3u + 7u + 1u));
  CHECK(p.weights.numel() + p.bias.numel() == p.parameter_count());
}

TEST_CASE("forget gate bias initialized to one, others zero") {
  Rng rng(3);
  const LstmParams p = LstmParams::init(2, 4, rng);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(p.bias[j] == 0.0);          // input gate
    CHECK(p.bias[4 + j] == 1.0);      // forget gate
    CHECK(p.bias[8 + j] == 0.0);      // candidate
    CHECK(p.bias[12 + j] == 0.0);     // output gate
  }
}

TEST_CASE("hidden state entries stay inside (-1, 1)") {
  Rng rng(4);
  const LstmParams p = LstmParams::init(2, 8, rng);
  LstmState s = LstmState::zero(8);
  for (int t = 0; t < 200; ++t) {
    s = lstm_step(p, random_tensor({2}, rng, -5.0, 5.0), s);
    for (double v : s.hidden.data) CHECK(std::abs(v) < 1.0);
    CHECK(s.cell.is_finite());
  }
}

TEST_CASE("dimension mismatch is a contract violation") {
  Rng rng(5);
  const LstmParams p = LstmParams::init(2, 4, rng);
  CHECK_THROWS_AS(lstm_step(p, Tensor::vec({1.0, 2.0, 3.0}), LstmState::zero(4)),
                  ContractError);
}

TEST_CASE("run_sequence basics: empty input, single step, determinism") {
  Rng rng(6);
  const LstmParams p = LstmParams::init(2, 6, rng);
  CHECK(run_sequence(p, {}, LstmState::zero(6)).empty());

  const Tensor x = Tensor::vec({0.4, -0.2});
  const auto once = run_sequence(p, {x}, LstmState::zero(6));
  REQUIRE(once.size() == 1);
  const LstmState direct = lstm_step(p, x, LstmState::zero(6));
  CHECK(once[0].hidden.data == direct.hidden.data);
  CHECK(once[0].cell.data == direct.cell.data);

  std::vector<Tensor> inputs;
  Rng in_rng(55);
  for (int t = 0; t < 10; ++t) inputs.push_back(random_tensor({2}, in_rng));
  const auto a = run_sequence(p, inputs, LstmState::zero(6));
  const auto b = run_sequence(p, inputs, LstmState::zero(6));
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].hidden.data == b[t].hidden.data);  // bit-identical
  }
}

TEST_CASE("run_sequence composes over concatenation") {
  Rng rng(7);
  const LstmParams p = LstmParams::init(3, 5, rng);
  std::vector<Tensor> first, second, all;
  for (int t = 0; t < 6; ++t) first.push_back(random_tensor({3}, rng));
  for (int t = 0; t < 9; ++t) second.push_back(random_tensor({3}, rng));
  all = first;
  all.insert(all.end(), second.begin(), second.end());

  const auto joint = run_sequence(p, all, LstmState::zero(5));
  const auto part1 = run_sequence(p, first, LstmState::zero(5));
  const auto part2 = run_sequence(p, second, part1.back());
  CHECK(joint.back().hidden.data == part2.back().hidden.data);
  CHECK(joint.back().cell.data == part2.back().cell.data);
}

TEST_CASE("plain batched step matches the graph step bit for bit") {
  Rng rng(8);
  LstmParams p = LstmParams::init(2, 16, rng);
  const Tensor x = random_tensor({4, 2}, rng);
  LstmStateBatch state{random_tensor({4, 16}, rng, -0.5, 0.5),
                       random_tensor({4, 16}, rng, -0.5, 0.5)};
  const LstmStateBatch plain = lstm_step_batch(p, x, state);

  Graph g;
  const LstmNodes cell{g.param(p.weights, 0), g.param(p.bias, 1)};
  const auto [h, c] = lstm_step_nodes(g, cell, g.constant(x), g.constant(state.hidden),
                                      g.constant(state.cell), 16);
  CHECK(g.value(h).data == plain.hidden.data);
  CHECK(g.value(c).data == plain.cell.data);
}

TEST_CASE("lstm gradient matches finite differences on a random 4-unit cell") {
  Rng rng(9);
  LstmParams p = LstmParams::init(3, 4, rng);
  const Tensor x = random_tensor({1, 3}, rng);
  const Tensor h0 = random_tensor({1, 4}, rng, -0.5, 0.5);
  const Tensor c0 = random_tensor({1, 4}, rng, -0.5, 0.5);

  auto loss_value = [&](const Tensor& w, const Tensor& b) {
    Graph g;
    const LstmNodes cell{g.param(w, 0), g.param(b, 1)};
    const auto [h, c] = lstm_step_nodes(g, cell, g.constant(x), g.constant(h0),
                                        g.constant(c0), 4);
    (void)c;
    return g.value(g.reduce_sum(h))[0];
  };

  GradientMap grads;
  {
    Graph g;
    const LstmNodes cell{g.param(p.weights, 0), g.param(p.bias, 1)};
    const auto [h, c] = lstm_step_nodes(g, cell, g.constant(x), g.constant(h0),
                                        g.constant(c0), 4);
    (void)c;
    grads = g.backward(g.reduce_sum(h));
  }

  const double step = 1e-5;
  double max_rel = 0.0;
  auto check_tensor = [&](Tensor& t, const Tensor& grad) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t[i];
      t[i] = saved + step;
      const double up = loss_value(p.weights, p.bias);
      t[i] = saved - step;
      const double down = loss_value(p.weights, p.bias);
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad[i];
      max_rel = std::max(max_rel, std::abs(analytic - numeric) /
                                      std::max({1.0, std::abs(analytic), std::abs(numeric)}));
    }
  };
  check_tensor(p.weights, grads.at(0));
  check_tensor(p.bias, grads.at(1));
  CHECK(max_rel < 1e-4);
}
