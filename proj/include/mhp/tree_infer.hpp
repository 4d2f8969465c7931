#pragma once

#include <span>
#include <vector>

#include "mhp/lstm.hpp"
#include "mhp/models.hpp"
#include "mhp/tensor.hpp"

namespace mhp::models {

struct InferenceConfig {
  int tree_depth = 8;
  int total_steps = 20;
  double split_threshold = 8.0;  // map units

  void validate() const;
};

/// Complete M-ary prediction tree of a fixed depth. levels[k] holds the
/// M^(k+1) node coordinates of level k in map units; the parent of node i at
/// level k is node i/M at level k-1 (level -1 being the root).
struct PredTree {
  Point2 root;
  int branching = 1;
  std::vector<std::vector<Point2>> levels;

  int depth() const { return static_cast<int>(levels.size()); }
  const std::vector<Point2>& leaves() const { return levels.back(); }
  /// Root-to-leaf coordinates (level 0 .. depth-1), length == depth().
  std::vector<Point2> path_to_leaf(std::size_t leaf_index) const;
};

/// Simulates `depth` future steps from a point whose state has already been
/// consumed. Children of a node are the M head read-outs of its hidden state;
/// each child's state then consumes the child's own coordinate. Levels are
/// evaluated as single batched LSTM steps.
PredTree build_tree(const GeneratorModel& model, const Point2& current,
                    const rnn::LstmState& state, int depth);

/// True iff the maximum pairwise distance among leaf coordinates strictly
/// exceeds the threshold. Exact, via convex hull.
bool check_split(const PredTree& tree, double threshold);

/// Component-wise mean. Summation runs in lexicographic point order, so the
/// result is permutation-invariant, and a set of identical points merges to
/// that exact point.
Point2 merge(std::span<const Point2> points);

/// Sorts leaves by angle around `current`, slices [min,max] into M equal
/// angular sub-ranges and returns the ancestor path of the leaf closest to
/// each sub-range midpoint. Requires branching >= 2.
std::vector<std::vector<Point2>> choose_tree_paths(const PredTree& tree, const Point2& current);

/// Closed-loop rollout: a merged trunk until the prediction tree becomes
/// diverse enough to split, then M independently advanced branches. With one
/// hypothesis the tree diameter is zero, so this reduces to plain single-model
/// generation.
struct InferenceResult {
  std::vector<Point2> trunk;                   // merged steps before the split
  std::vector<std::vector<Point2>> branches;   // M per-hypothesis continuations
  int split_step = -1;                         // -1 when no split happened

  /// Generated sequences (seed excluded), each exactly total_steps long:
  /// one if no split happened, M otherwise.
  std::vector<std::vector<Point2>> hypotheses() const;
};

InferenceResult infer(const GeneratorModel& model, std::span<const Point2> seed,
                      const InferenceConfig& config);

}  // namespace mhp::models
