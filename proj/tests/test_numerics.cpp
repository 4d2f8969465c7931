#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "mhp/adam.hpp"
#include "mhp/error.hpp"
#include "mhp/graph.hpp"
#include "mhp/kernels.hpp"
#include "mhp/rng.hpp"

using namespace mhp;

namespace {

double grad_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// One differentiable-op test case: inputs become graph parameters, the op
// output is contracted against fixed random weights so upstream gradients are
// non-trivial, and every input element is checked against central finite
// differences.
struct OpCase {
  std::string name;
  std::vector<Tensor> inputs;
  std::function<NodeId(Graph&, const std::vector<NodeId>&)> apply;
};

void check_case_gradients(const OpCase& c, Rng& rng, double h = 1e-5, double tol = 1e-4) {
  // Discover the output shape, then fix contraction weights.
  Tensor weights;
  {
    Graph g;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      ids.push_back(g.param(c.inputs[i], static_cast<std::uint32_t>(i)));
    }
    const NodeId out = c.apply(g, ids);
    weights = random_tensor(g.value(out).shape, rng);
  }
  auto forward = [&](const std::vector<Tensor>& xs) {
    Graph g;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ids.push_back(g.param(xs[i], static_cast<std::uint32_t>(i)));
    }
    const NodeId out = c.apply(g, ids);
    return g.value(g.reduce_sum(g.mul(out, g.constant(weights))))[0];
  };

  // Analytic gradients.
  GradientMap grads;
  {
    Graph g;
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      ids.push_back(g.param(c.inputs[i], static_cast<std::uint32_t>(i)));
    }
    const NodeId out = c.apply(g, ids);
    grads = g.backward(g.reduce_sum(g.mul(out, g.constant(weights))));
  }

  std::vector<Tensor> xs = c.inputs;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < xs[i].numel(); ++k) {
      const double saved = xs[i][k];
      xs[i][k] = saved + h;
      const double up = forward(xs);
      xs[i][k] = saved - h;
      const double down = forward(xs);
      xs[i][k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads.at(static_cast<std::uint32_t>(i))[k];
      INFO(c.name, " input ", i, " element ", k);
      CHECK(grad_rel_err(analytic, numeric) < tol);
    }
  }
}

}  // namespace

TEST_CASE("gemm kernels match the naive triple loop") {
  Rng rng(7);
  for (int iter = 0; iter < 20; ++iter) {
    const std::size_t m = 1 + rng.below(40), n = 1 + rng.below(40), k = 1 + rng.below(40);
    Tensor a = random_tensor({m, k}, rng);
    Tensor b = random_tensor({k, n}, rng);
    Tensor c = Tensor::zeros({m, n});
    gemm_nn(m, n, k, a.data.data(), b.data.data(), c.data.data(), false);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (std::size_t kk = 0; kk < k; ++kk) ref += a.at(i, kk) * b.at(kk, j);
        CHECK(c.at(i, j) == doctest::Approx(ref).epsilon(1e-12));
      }
    }
    // A^T * B2 with A [m x k], B2 [m x n] -> C [k x n].
    Tensor b2 = random_tensor({m, n}, rng);
    Tensor ct = Tensor::zeros({k, n});
    gemm_tn(k, n, m, a.data.data(), b2.data.data(), ct.data.data(), false);
    Tensor at = Tensor::zeros({k, m});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) at.at(kk, i) = a.at(i, kk);
    Tensor ref2 = Tensor::zeros({k, n});
    gemm_nn(k, n, m, at.data.data(), b2.data.data(), ref2.data.data(), false);
    for (std::size_t i = 0; i < k * n; ++i) {
      CHECK(ct[i] == doctest::Approx(ref2[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gemm results do not depend on the thread count") {
  Rng rng(11);
  Tensor a = random_tensor({64, 130}, rng);
  Tensor b = random_tensor({130, 96}, rng);
  Tensor c1 = Tensor::zeros({64, 96});
  Tensor c2 = Tensor::zeros({64, 96});
  set_num_threads(1);
  gemm_nn(64, 96, 130, a.data.data(), b.data.data(), c1.data.data(), false);
  set_num_threads(0);
  gemm_nn(64, 96, 130, a.data.data(), b.data.data(), c2.data.data(), false);
  CHECK(c1.data == c2.data);
}

TEST_CASE("every graph primitive matches central finite differences") {
  // 50+ random repetitions across all differentiable primitives.
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 100);
    const std::size_t n = 2 + rng.below(3);
    const std::size_t m = 2 + rng.below(4);
    const std::size_t k = 2 + rng.below(3);
    std::vector<std::size_t> gidx(n);
    for (auto& v : gidx) v = rng.below(m);

    std::vector<OpCase> cases;
    cases.push_back({"add", {random_tensor({n, m}, rng), random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.add(a[0], a[1]); }});
    cases.push_back({"sub", {random_tensor({n, m}, rng), random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.sub(a[0], a[1]); }});
    cases.push_back({"mul", {random_tensor({n, m}, rng), random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.mul(a[0], a[1]); }});
    cases.push_back({"scale", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.scale(a[0], -1.7); }});
    cases.push_back({"matmul", {random_tensor({n, k}, rng), random_tensor({k, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.matmul(a[0], a[1]); }});
    cases.push_back({"add_row_vec", {random_tensor({n, m}, rng), random_tensor({m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) {
                       return g.add_row_vec(a[0], a[1]);
                     }});
    cases.push_back({"sigmoid", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.sigmoid(a[0]); }});
    cases.push_back({"tanh", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.tanh(a[0]); }});
    cases.push_back({"exp", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.exp(a[0]); }});
    cases.push_back({"log", {random_tensor({n, m}, rng, 0.2, 1.2)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.log(a[0]); }});
    cases.push_back({"reduce_sum", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.reduce_sum(a[0]); }});
    cases.push_back({"row_sum", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) { return g.row_sum(a[0]); }});
    cases.push_back({"concat_cols", {random_tensor({n, m}, rng), random_tensor({n, k}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) {
                       return g.concat_cols(a[0], a[1]);
                     }});
    cases.push_back({"slice_cols", {random_tensor({n, m}, rng)},
                     [m](Graph& g, const std::vector<NodeId>& a) {
                       return g.slice_cols(a[0], 1, m - 1);
                     }});
    cases.push_back({"gather_cols", {random_tensor({n, m}, rng)},
                     [gidx](Graph& g, const std::vector<NodeId>& a) {
                       return g.gather_cols(a[0], gidx);
                     }});
    cases.push_back({"row_logsumexp", {random_tensor({n, m}, rng)},
                     [](Graph& g, const std::vector<NodeId>& a) {
                       return g.row_logsumexp(a[0]);
                     }});
    for (const OpCase& c : cases) check_case_gradients(c, rng);
  }
}

TEST_CASE("backward: square function and unreachable parameter") {
  Graph g;
  const NodeId w = g.param(Tensor::vec({3.0}), 0);
  const NodeId unused = g.param(Tensor::vec({4.0, 5.0}), 1);
  (void)unused;
  const NodeId loss = g.reduce_sum(g.mul(w, w));
  const GradientMap grads = g.backward(loss);
  CHECK(grads.at(0)[0] == doctest::Approx(6.0));
  CHECK(grads.at(1)[0] == 0.0);  // untouched by the loss
  CHECK(grads.at(1)[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar losses") {
  Graph g;
  const NodeId w = g.param(Tensor::vec({1.0, 2.0}), 0);
  CHECK_THROWS_AS(g.backward(w), ContractError);
}

TEST_CASE("graph values stay finite through a deep composite") {
  Rng rng(3);
  Graph g;
  NodeId x = g.param(random_tensor({4, 4}, rng), 0);
  for (int i = 0; i < 20; ++i) x = g.tanh(g.add(x, g.sigmoid(x)));
  CHECK(g.value(x).is_finite());
}

TEST_CASE("softmax: symmetry, stability and arithmetic") {
  const Tensor thirds = softmax(Tensor::vec({0.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) CHECK(thirds[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  const Tensor stable = softmax(Tensor::vec({1000.0, 0.0}));
  CHECK(stable.is_finite());
  CHECK(stable[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(stable[1] == doctest::Approx(0.0).epsilon(1e-12));

  const Tensor ratio = softmax(Tensor::vec({std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(ratio[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(ratio[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
  CHECK(ratio[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("softmax rows normalize to one and commute with permutations") {
  Rng rng(17);
  for (int iter = 0; iter < 30; ++iter) {
    const std::size_t c = 2 + rng.below(6);
    Tensor logits = random_tensor({c}, rng, -30.0, 30.0);
    const Tensor p = softmax(logits);
    double s = 0.0;
    for (double v : p.data) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);

    // Reverse as a representative permutation.
    Tensor rev = logits;
    std::reverse(rev.data.begin(), rev.data.end());
    const Tensor pr = softmax(rev);
    for (std::size_t i = 0; i < c; ++i) {
      CHECK(pr[c - 1 - i] == doctest::Approx(p[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  Tensor w = Tensor::vec({1.0, -2.0, 3.0});
  ParamRefs refs{{"w", &w}};
  AdamState st;
  GradientMap grads;
  grads.emplace(0, Tensor::zeros({3}));
  adam_step(refs, grads, st);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == -2.0);
  CHECK(w[2] == 3.0);
  CHECK(st.step_count == 1);
}

TEST_CASE("adam: first step with unit gradient moves by about the learning rate") {
  Tensor w = Tensor::vec({0.5});
  ParamRefs refs{{"w", &w}};
  AdamState st;
  GradientMap grads;
  grads.emplace(0, Tensor::vec({1.0}));
  adam_step(refs, grads, st);
  CHECK(std::abs((0.5 - w[0]) - st.learning_rate) < 1e-9);
}

TEST_CASE("adam: optimizes a scalar quadratic") {
  Tensor w = Tensor::vec({0.0});
  ParamRefs refs{{"w", &w}};
  AdamState st;
  st.learning_rate = 0.1;
  for (int i = 0; i < 100; ++i) {
    GradientMap grads;
    grads.emplace(0, Tensor::vec({2.0 * (w[0] - 2.0)}));
    adam_step(refs, grads, st);
  }
  CHECK(std::abs(w[0] - 2.0) < 0.1);
  CHECK(st.step_count == 100);
}

TEST_CASE("adam update is deterministic") {
  auto run = [] {
    Tensor w = Tensor::vec({1.0, 2.0});
    ParamRefs refs{{"w", &w}};
    AdamState st;
    for (int i = 0; i < 10; ++i) {
      GradientMap grads;
      grads.emplace(0, Tensor::vec({0.3 * w[0], -0.2 * w[1]}));
      adam_step(refs, grads, st);
    }
    return w.data;
  };
  CHECK(run() == run());
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  Tensor w = Tensor::vec({1.0, 2.0});
  ParamRefs refs{{"w", &w}};
  AdamState st;
  GradientMap grads;
  grads.emplace(0, Tensor::vec({1.0}));
  CHECK_THROWS_AS(adam_step(refs, grads, st), ContractError);
}

TEST_CASE("global norm clipping") {
  GradientMap grads;
  grads.emplace(0, Tensor::vec({3.0, 4.0}));  // norm 5 exactly: no clip at 5
  CHECK(clip_global_norm(grads, 5.0) == doctest::Approx(5.0));
  CHECK(grads.at(0)[0] == 3.0);
  grads.at(0)[0] = 30.0;
  grads.at(0)[1] = 40.0;
  clip_global_norm(grads, 5.0);
  CHECK(grads.at(0)[0] == doctest::Approx(3.0));
  CHECK(grads.at(0)[1] == doctest::Approx(4.0));
}

TEST_CASE("rng: determinism, splitting and rough distribution") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(7);
  Rng s1 = base.split(1), s1b = base.split(1), s2 = base.split(2);
  CHECK(s1.next_u64() == s1b.next_u64());
  CHECK(s1.next_u64() != s2.next_u64());

  Rng u(3);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    mean += v;
  }
  CHECK(std::abs(mean / 10000.0 - 0.5) < 0.02);

  Rng n(4);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double v = n.normal();
    m1 += v;
    m2 += v * v;
  }
  CHECK(std::abs(m1 / 10000.0) < 0.05);
  CHECK(std::abs(m2 / 10000.0 - 1.0) < 0.1);
}
