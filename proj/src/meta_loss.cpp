#include "mhp/meta_loss.hpp"

#include <cmath>

#include "mhp/error.hpp"
#include "mhp/kernels.hpp"

namespace mhp {

std::size_t assign_hypothesis(std::span<const double> losses) {
  require(!losses.empty(), "assign_hypothesis: empty loss list");
  std::size_t best = 0;
  for (std::size_t j = 1; j < losses.size(); ++j) {
    require(std::isfinite(losses[j]), "assign_hypothesis: non-finite loss");
    if (losses[j] < losses[best]) best = j;
  }
  require(std::isfinite(losses[0]), "assign_hypothesis: non-finite loss");
  return best;
}

std::vector<double> delta_weights(const MhpConfig& config, std::size_t winner) {
  const int m = config.num_hypotheses;
  require(m >= 1, "delta_weights: need at least one hypothesis");
  require(winner < static_cast<std::size_t>(m), "delta_weights: winner out of range");
  if (m == 1) return {1.0};
  const double share = config.epsilon / static_cast<double>(m - 1);
  std::vector<double> w(static_cast<std::size_t>(m), share);
  w[winner] = 1.0 - config.epsilon;
  // The last weight absorbs the rounding residue of the partial sum, so the
  // index-order total is exactly 1.
  double partial = 0.0;
  for (std::size_t j = 0; j + 1 < w.size(); ++j) partial += w[j];
  w.back() = 1.0 - partial;
  return w;
}

NodeId meta_loss(Graph& g, const MhpConfig& config, const std::vector<NodeId>& losses) {
  require(losses.size() == static_cast<std::size_t>(config.num_hypotheses),
          "meta_loss: loss count != num_hypotheses");
  std::vector<double> values;
  values.reserve(losses.size());
  for (NodeId id : losses) {
    require(g.value(id).numel() == 1, "meta_loss: losses must be scalar nodes");
    values.push_back(g.value(id)[0]);
  }
  const std::size_t winner = assign_hypothesis(values);
  const std::vector<double> w = delta_weights(config, winner);
  NodeId acc = g.scale(losses[0], w[0]);
  for (std::size_t j = 1; j < losses.size(); ++j) {
    acc = g.add(acc, g.scale(losses[j], w[j]));
  }
  return acc;
}

NodeId meta_loss_rows(Graph& g, const MhpConfig& config, const std::vector<NodeId>& losses) {
  require(losses.size() == static_cast<std::size_t>(config.num_hypotheses),
          "meta_loss_rows: loss count != num_hypotheses");
  const std::size_t n = g.value(losses[0]).numel();
  const std::size_t m = losses.size();
  std::vector<Tensor> weights(m, Tensor::zeros({n}));
  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[j] = g.value(losses[j])[i];
    const std::size_t winner = assign_hypothesis(row);
    const std::vector<double> w = delta_weights(config, winner);
    for (std::size_t j = 0; j < m; ++j) weights[j][i] = w[j];
  }
  NodeId acc = g.mul(losses[0], g.constant(std::move(weights[0])));
  for (std::size_t j = 1; j < m; ++j) {
    acc = g.add(acc, g.mul(losses[j], g.constant(std::move(weights[j]))));
  }
  return acc;
}

std::vector<double> meta_loss_values(const MhpConfig& config,
                                     const std::vector<std::vector<double>>& losses) {
  require(losses.size() == static_cast<std::size_t>(config.num_hypotheses),
          "meta_loss_values: loss count != num_hypotheses");
  const std::size_t n = losses[0].size();
  const std::size_t m = losses.size();
  std::vector<std::vector<double>> weights(m, std::vector<double>(n));
  std::vector<double> row(m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) row[j] = losses[j][i];
    const std::size_t winner = assign_hypothesis(row);
    const std::vector<double> w = delta_weights(config, winner);
    for (std::size_t j = 0; j < m; ++j) weights[j][i] = w[j];
  }
  // Same kernel sequence as meta_loss_rows, so values agree bit-for-bit.
  std::vector<double> acc(n), term(n);
  vmul(losses[0].data(), weights[0].data(), acc.data(), n);
  for (std::size_t j = 1; j < m; ++j) {
    vmul(losses[j].data(), weights[j].data(), term.data(), n);
    vadd(acc.data(), term.data(), acc.data(), n);
  }
  return acc;
}

}  // namespace mhp
