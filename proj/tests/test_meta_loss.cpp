#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mhp/error.hpp"
#include "mhp/meta_loss.hpp"
#include "mhp/rng.hpp"

using namespace mhp;

TEST_CASE("assign_hypothesis returns the argmin with lowest-index ties") {
  CHECK(assign_hypothesis(std::vector<double>{1.0, 2.0, 4.0}) == 0);
  CHECK(assign_hypothesis(std::vector<double>{3.0, 3.0, 3.0}) == 0);
  CHECK(assign_hypothesis(std::vector<double>{5.0, 0.1, 5.0}) == 1);
  CHECK_THROWS_AS(assign_hypothesis(std::vector<double>{}), ContractError);
}

TEST_CASE("delta_weights: direct substitution, degenerate and winner-takes-all") {
  const auto w = delta_weights({3, 0.15}, 0);
  CHECK(w[0] == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(w[1] == doctest::Approx(0.075).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.075).epsilon(1e-15));

  CHECK(delta_weights({1, 0.15}, 0) == std::vector<double>{1.0});

  const auto wta = delta_weights({2, 0.0}, 0);
  CHECK(wta[0] == 1.0);
  CHECK(wta[1] == 0.0);

  CHECK_THROWS_AS(delta_weights({3, 0.15}, 3), ContractError);
}

TEST_CASE("delta_weights sums to exactly one for every M and epsilon") {
  for (int m = 1; m <= 12; ++m) {
    for (double eps : {0.0, 0.05, 0.1, 0.15, 0.3, 0.5, 0.7, 0.99}) {
      for (int winner = 0; winner < m; ++winner) {
        const auto w = delta_weights({m, eps}, static_cast<std::size_t>(winner));
        double s = 0.0;
        for (double v : w) s += v;
        CHECK(s == 1.0);
      }
    }
  }
}

namespace {

NodeId scalar_param(Graph& g, double v, std::uint32_t id) {
  return g.param(Tensor::scalar(v), id);
}

}  // namespace

TEST_CASE("meta_loss: weighted-sum arithmetic") {
  Graph g;
  const std::vector<NodeId> losses{scalar_param(g, 1.0, 0), scalar_param(g, 2.0, 1),
                                   scalar_param(g, 4.0, 2)};
  const NodeId meta = meta_loss(g, {3, 0.15}, losses);
  CHECK(g.value(meta)[0] == doctest::Approx(1.3).epsilon(1e-14));
}

TEST_CASE("meta_loss: single hypothesis equals the base loss exactly") {
  Graph g;
  const std::vector<NodeId> losses{scalar_param(g, 0.7321, 0)};
  const NodeId meta = meta_loss(g, {1, 0.15}, losses);
  CHECK(g.value(meta)[0] == 0.7321);
}

TEST_CASE("meta_loss: epsilon zero is the pure minimum") {
  Graph g;
  const std::vector<NodeId> losses{scalar_param(g, 3.0, 0), scalar_param(g, 7.0, 1)};
  const NodeId meta = meta_loss(g, {2, 0.0}, losses);
  CHECK(g.value(meta)[0] == 3.0);
}

TEST_CASE("meta_loss stays between min and max and is permutation-consistent") {
  Rng rng(1);
  for (int iter = 0; iter < 200; ++iter) {
    const int m = 1 + static_cast<int>(rng.below(5));
    const double eps = m == 1 ? 0.0 : rng.uniform(0.0, 0.99);
    std::vector<double> values(static_cast<std::size_t>(m));
    for (double& v : values) v = rng.uniform(0.0, 10.0);

    Graph g;
    std::vector<NodeId> nodes;
    for (std::size_t j = 0; j < values.size(); ++j) {
      nodes.push_back(scalar_param(g, values[j], static_cast<std::uint32_t>(j)));
    }
    const double got = g.value(meta_loss(g, {m, eps}, nodes))[0];
    const double lo = *std::min_element(values.begin(), values.end());
    const double hi = *std::max_element(values.begin(), values.end());
    CHECK(got >= lo - 1e-12);
    CHECK(got <= hi + 1e-12);
    if (eps == 0.0) CHECK(got == doctest::Approx(lo).epsilon(1e-15));

    // Permuting hypotheses and losses together leaves the value unchanged.
    std::vector<double> perm = values;
    std::reverse(perm.begin(), perm.end());
    Graph g2;
    std::vector<NodeId> nodes2;
    for (std::size_t j = 0; j < perm.size(); ++j) {
      nodes2.push_back(scalar_param(g2, perm[j], static_cast<std::uint32_t>(j)));
    }
    const double got2 = g2.value(meta_loss(g2, {m, eps}, nodes2))[0];
    CHECK(got2 == doctest::Approx(got).epsilon(1e-13));
  }
}

TEST_CASE("meta_loss gradient w.r.t. each hypothesis loss equals its weight") {
  Rng rng(2);
  for (int iter = 0; iter < 50; ++iter) {
    const int m = 2 + static_cast<int>(rng.below(4));
    const double eps = rng.uniform(0.0, 0.9);
    std::vector<double> values(static_cast<std::size_t>(m));
    for (double& v : values) v = rng.uniform(0.5, 5.0);

    Graph g;
    std::vector<NodeId> nodes;
    for (std::size_t j = 0; j < values.size(); ++j) {
      nodes.push_back(scalar_param(g, values[j], static_cast<std::uint32_t>(j)));
    }
    const NodeId meta = meta_loss(g, {m, eps}, nodes);
    const GradientMap grads = g.backward(meta);

    const std::size_t winner = assign_hypothesis(values);
    const auto expected = delta_weights({m, eps}, winner);
    for (std::size_t j = 0; j < values.size(); ++j) {
      CHECK(grads.at(static_cast<std::uint32_t>(j))[0] ==
            doctest::Approx(expected[j]).epsilon(1e-15));
    }

    // Central finite differences, with a step small enough not to flip the
    // winner assignment.
    const double h = 1e-8;
    auto value_at = [&](std::size_t perturbed, double delta) {
      Graph g2;
      std::vector<NodeId> n2;
      for (std::size_t j = 0; j < values.size(); ++j) {
        n2.push_back(scalar_param(g2, values[j] + (j == perturbed ? delta : 0.0),
                                  static_cast<std::uint32_t>(j)));
      }
      return g2.value(meta_loss(g2, {m, eps}, n2))[0];
    };
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double numeric = (value_at(j, h) - value_at(j, -h)) / (2.0 * h);
      CHECK(numeric == doctest::Approx(expected[j]).epsilon(1e-5));
    }
  }
}

TEST_CASE("meta_loss_rows picks winners per sample") {
  Graph g;
  const NodeId l0 = g.param(Tensor::vec({1.0, 9.0}), 0);
  const NodeId l1 = g.param(Tensor::vec({5.0, 2.0}), 1);
  const NodeId meta = meta_loss_rows(g, {2, 0.2}, {l0, l1});
  CHECK(g.value(meta)[0] == doctest::Approx(0.8 * 1.0 + 0.2 * 5.0));
  CHECK(g.value(meta)[1] == doctest::Approx(0.8 * 2.0 + 0.2 * 9.0));

  const GradientMap grads = g.backward(g.reduce_sum(meta));
  CHECK(grads.at(0)[0] == doctest::Approx(0.8));
  CHECK(grads.at(0)[1] == doctest::Approx(0.2));
  CHECK(grads.at(1)[0] == doctest::Approx(0.2));
  CHECK(grads.at(1)[1] == doctest::Approx(0.8));
}

TEST_CASE("meta_loss_values agrees with the graph version") {
  Rng rng(3);
  for (int iter = 0; iter < 30; ++iter) {
    const int m = 1 + static_cast<int>(rng.below(4));
    const std::size_t n = 1 + rng.below(6);
    const double eps = m == 1 ? 0.0 : rng.uniform(0.0, 0.9);
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(m),
                                            std::vector<double>(n));
    Graph g;
    std::vector<NodeId> nodes;
    for (int j = 0; j < m; ++j) {
      for (auto& v : losses[static_cast<std::size_t>(j)]) v = rng.uniform(0.0, 4.0);
      nodes.push_back(g.param(Tensor::vec(losses[static_cast<std::size_t>(j)]),
                              static_cast<std::uint32_t>(j)));
    }
    const Tensor& graph_vals = g.value(meta_loss_rows(g, {m, eps}, nodes));
    const auto plain = meta_loss_values({m, eps}, losses);
    for (std::size_t i = 0; i < n; ++i) CHECK(graph_vals[i] == plain[i]);
  }
}
