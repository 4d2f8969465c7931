#pragma once

#include <set>
#include <span>
#include <utility>
#include <vector>

#include "mhp/error.hpp"
#include "mhp/tensor.hpp"

namespace mhp::metrics {

/// Best-hypothesis score: min over the prediction set of l(x, label).
template <class T, class L, class Metric>
double oracle_metric(Metric&& l, const std::vector<T>& predictions, const L& label) {
  require(!predictions.empty(), "oracle_metric: empty prediction set");
  double best = l(predictions.front(), label);
  for (std::size_t i = 1; i < predictions.size(); ++i) {
    best = std::min(best, l(predictions[i], label));
  }
  return best;
}

/// (final, average) Euclidean displacement between two equal-length sequences.
std::pair<double, double> fde_ade(std::span<const Point2> predicted,
                                  std::span<const Point2> truth);

inline double fde(std::span<const Point2> a, std::span<const Point2> b) {
  return fde_ade(a, b).first;
}
inline double ade(std::span<const Point2> a, std::span<const Point2> b) {
  return fde_ade(a, b).second;
}

// ---------------------------------------------------------------------------
// Re-labelling structures
// ---------------------------------------------------------------------------

/// Axis-aligned percentile box over a flattened sample space: dimension d
/// spans the ((1-tau)/2) to ((1+tau)/2) quantiles of the fitted samples, so
/// approximately a fraction tau of them falls inside.
struct Polytope {
  int class_id = 0;
  double tau = 1.0;
  std::vector<double> lower;
  std::vector<double> upper;

  bool contains(std::span<const double> x) const;
};

Polytope fit_polytope(const std::vector<std::vector<double>>& class_samples, double tau,
                      int class_id = 0);

/// Label set per sample: the original label plus every class whose polytope
/// contains the flattened sample.
std::vector<std::set<int>> relabel_discrete(const std::vector<std::vector<double>>& samples,
                                            const std::vector<int>& labels,
                                            const std::vector<Polytope>& polytopes);

/// Set precision and recall of one prediction set against one label set.
std::pair<double, double> pr_re(const std::set<int>& predicted, const std::set<int>& labels);

inline double f1_score(double pr, double re) {
  return (pr + re) > 0.0 ? 2.0 * pr * re / (pr + re) : 0.0;
}

// ---------------------------------------------------------------------------
// Mean-shift clustering (continuous labels)
// ---------------------------------------------------------------------------

struct ClusterModel {
  std::vector<std::vector<double>> centers;  // mean-shift modes
  std::vector<int> assignment;               // per input point
  double bandwidth = 0.0;
};

/// Median pairwise distance of (up to) a 500-point deterministic subsample,
/// halved. Never returns a non-positive value.
double auto_bandwidth(const std::vector<std::vector<double>>& points);

/// Flat-kernel mean-shift: each point iterates to the mean of its
/// bandwidth-neighbourhood until movement falls below 1e-3 * bandwidth; modes
/// closer than bandwidth/2 merge, first-come.
ClusterModel mean_shift(const std::vector<std::vector<double>>& points, double bandwidth);

/// Cluster-id label sets: every cluster whose input-space polytope contains
/// the flattened input. An empty set falls back to the cluster whose box is
/// nearest in the input space.
std::vector<std::vector<int>> relabel_continuous(
    const std::vector<std::vector<double>>& inputs, const std::vector<Polytope>& cluster_boxes);

// ---------------------------------------------------------------------------
// Set-based metric extension
// ---------------------------------------------------------------------------

/// Symmetric set extension of a base metric: every prediction is charged its
/// distance to the nearest label and every label its distance to the nearest
/// prediction, normalized by |predictions| + |labels|.
template <class A, class B, class Metric>
double l_m2(Metric&& l, const std::vector<A>& predictions, const std::vector<B>& labels) {
  require(!predictions.empty(), "l_m2: empty prediction set");
  require(!labels.empty(), "l_m2: empty label set");
  const double denom = static_cast<double>(predictions.size() + labels.size());
  double acc = 0.0;
  for (const A& x : predictions) {
    double best = l(x, labels.front());
    for (std::size_t j = 1; j < labels.size(); ++j) best = std::min(best, l(x, labels[j]));
    acc += best / denom;
  }
  for (const B& y : labels) {
    double best = l(predictions.front(), y);
    for (std::size_t i = 1; i < predictions.size(); ++i) {
      best = std::min(best, l(predictions[i], y));
    }
    acc += best / denom;
  }
  return acc;
}

/// Flattens a coordinate sequence to (x1, y1, ..., xk, yk).
std::vector<double> flatten(std::span<const Point2> seq);
std::vector<Point2> unflatten(std::span<const double> flat);

}  // namespace mhp::metrics
