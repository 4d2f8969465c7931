#pragma once

#include <span>
#include <vector>

#include "mhp/graph.hpp"

namespace mhp {

/// Hypothesis count and the relaxation weight shared by every multi-hypothesis
/// model. epsilon spreads a small fraction of the gradient to non-winning
/// hypotheses so none can starve after a bad initialization.
struct MhpConfig {
  int num_hypotheses = 3;
  double epsilon = 0.15;
};

/// Index of the hypothesis with minimal base loss; ties break to the lowest
/// index. This is the discrete cell assignment the weighting below relies on.
std::size_t assign_hypothesis(std::span<const double> losses);

/// Relaxed one-hot weights: 1-epsilon on the winner, epsilon/(M-1) elsewhere.
/// M == 1 always yields {1.0}. The returned weights sum to exactly 1.
std::vector<double> delta_weights(const MhpConfig& config, std::size_t winner);

/// Weighted sum of per-hypothesis scalar loss nodes. The winner is chosen on
/// detached values; only the weighted sum carries gradient, so
/// d(meta)/d(loss_j) equals hypothesis j's weight.
NodeId meta_loss(Graph& g, const MhpConfig& config, const std::vector<NodeId>& losses);

/// Row-wise variant: each input node is a [n] vector of per-sample losses for
/// one hypothesis; the winner is chosen independently per sample. Returns the
/// [n] vector of per-sample meta-losses.
NodeId meta_loss_rows(Graph& g, const MhpConfig& config, const std::vector<NodeId>& losses);

/// Plain-value twin of meta_loss_rows for validation passes.
std::vector<double> meta_loss_values(const MhpConfig& config,
                                     const std::vector<std::vector<double>>& losses);

}  // namespace mhp
