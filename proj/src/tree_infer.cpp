#include "mhp/tree_infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mhp/error.hpp"
#include "mhp/kernels.hpp"

namespace mhp::models {

namespace {

Tensor scaled_point(const Point2& p, double scale) {
  return Tensor({2}, {p.x * scale, p.y * scale});
}

rnn::LstmState consume(const GeneratorModel& model, const rnn::LstmState& state,
                       const Point2& p) {
  return rnn::lstm_step(model.lstm, scaled_point(p, model.input_scale), state);
}

// Head read-outs for a batch of hidden states: child (row r, head m) lands in
// row r*M + m of the result, in map units.
std::vector<Point2> children_points(const GeneratorModel& model, const Tensor& hidden) {
  const std::size_t rows = hidden.rows();
  const std::size_t m = model.heads.size();
  std::vector<Point2> out(rows * m);
  Tensor buf = Tensor::zeros({rows, 2});
  const double inv_scale = 1.0 / model.input_scale;
  for (std::size_t j = 0; j < m; ++j) {
    gemm_nn(rows, 2, hidden.cols(), hidden.data.data(), model.heads[j].weights.data.data(),
            buf.data.data(), false);
    add_row_vec(buf.data.data(), model.heads[j].bias.data.data(), buf.data.data(), rows, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      out[r * m + j] = {buf.at(r, 0) * inv_scale, buf.at(r, 1) * inv_scale};
    }
  }
  return out;
}

// Exact diameter of a 2-D point set: convex hull + brute force over hull pairs.
double point_set_diameter(const std::vector<Point2>& pts) {
  if (pts.size() < 2) return 0.0;
  std::vector<Point2> p = pts;
  std::sort(p.begin(), p.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  p.erase(std::unique(p.begin(), p.end(),
                      [](const Point2& a, const Point2& b) {
                        return a.x == b.x && a.y == b.y;
                      }),
          p.end());
  if (p.size() < 2) return 0.0;
  auto cross = [](const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
  };
  std::vector<Point2> hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0.0) --k;
    hull[k++] = p[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = p.size() - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], p[i]) <= 0.0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  double best = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    for (std::size_t j = i + 1; j < hull.size(); ++j) {
      best = std::max(best, squared_distance(hull[i], hull[j]));
    }
  }
  return std::sqrt(best);
}

}  // namespace

void InferenceConfig::validate() const {
  require(tree_depth >= 1, "inference: tree_depth must be at least 1");
  require(total_steps >= 1, "inference: total_steps must be at least 1");
  require(split_threshold > 0.0, "inference: split_threshold must be positive");
}

std::vector<Point2> PredTree::path_to_leaf(std::size_t leaf_index) const {
  require(leaf_index < leaves().size(), "path_to_leaf: leaf index out of range");
  std::vector<Point2> path(levels.size());
  std::size_t idx = leaf_index;
  for (std::size_t level = levels.size(); level-- > 0;) {
    path[level] = levels[level][idx];
    idx /= static_cast<std::size_t>(branching);
  }
  return path;
}

PredTree build_tree(const GeneratorModel& model, const Point2& current,
                    const rnn::LstmState& state, int depth) {
  require(depth >= 1, "build_tree: depth must be at least 1");
  const std::size_t m = model.heads.size();
  const std::size_t hid = model.lstm.hidden_dim;

  PredTree tree;
  tree.root = current;
  tree.branching = static_cast<int>(m);
  tree.levels.reserve(static_cast<std::size_t>(depth));

  rnn::LstmStateBatch parents{Tensor({1, hid}, state.hidden.data),
                              Tensor({1, hid}, state.cell.data)};
  for (int level = 0; level < depth; ++level) {
    std::vector<Point2> pts = children_points(model, parents.hidden);
    if (level + 1 < depth) {
      // Child states: each row of the parent batch expands into M rows that
      // consume their own coordinate.
      const std::size_t rows = pts.size();
      Tensor inputs = Tensor::zeros({rows, 2});
      rnn::LstmStateBatch expanded = rnn::LstmStateBatch::zero(rows, hid);
      for (std::size_t r = 0; r < rows; ++r) {
        inputs.at(r, 0) = pts[r].x * model.input_scale;
        inputs.at(r, 1) = pts[r].y * model.input_scale;
        const std::size_t parent = r / m;
        std::copy_n(parents.hidden.data.data() + parent * hid, hid,
                    expanded.hidden.data.data() + r * hid);
        std::copy_n(parents.cell.data.data() + parent * hid, hid,
                    expanded.cell.data.data() + r * hid);
      }
      parents = rnn::lstm_step_batch(model.lstm, inputs, expanded);
    }
    tree.levels.push_back(std::move(pts));
  }
  return tree;
}

bool check_split(const PredTree& tree, double threshold) {
  require(!tree.levels.empty() && !tree.leaves().empty(), "check_split: tree has no leaves");
  return point_set_diameter(tree.leaves()) > threshold;
}

Point2 merge(std::span<const Point2> points) {
  require(!points.empty(), "merge: empty point list");
  bool all_same = true;
  for (const Point2& p : points) {
    if (p.x != points[0].x || p.y != points[0].y) {
      all_same = false;
      break;
    }
  }
  if (all_same) return points[0];
  std::vector<Point2> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Point2& a, const Point2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  double sx = 0.0, sy = 0.0;
  for (const Point2& p : sorted) {
    sx += p.x;
    sy += p.y;
  }
  const double n = static_cast<double>(points.size());
  return {sx / n, sy / n};
}

std::vector<std::vector<Point2>> choose_tree_paths(const PredTree& tree, const Point2& current) {
  require(tree.branching >= 2, "choose_tree_paths: needs at least two hypotheses");
  const std::vector<Point2>& leaves = tree.leaves();
  const std::size_t m = static_cast<std::size_t>(tree.branching);

  std::vector<double> angle(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    angle[i] = std::atan2(leaves[i].y - current.y, leaves[i].x - current.x);
  }
  std::vector<std::size_t> order(leaves.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return angle[a] < angle[b] || (angle[a] == angle[b] && a < b);
  });
  const double lo = angle[order.front()];
  const double hi = angle[order.back()];

  std::vector<std::vector<Point2>> paths;
  paths.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double target =
        lo + (static_cast<double>(k) + 0.5) * (hi - lo) / static_cast<double>(m);
    std::size_t pick = order[0];
    double best = std::abs(angle[pick] - target);
    for (std::size_t oi = 1; oi < order.size(); ++oi) {
      const double d = std::abs(angle[order[oi]] - target);
      if (d < best) {
        best = d;
        pick = order[oi];
      }
    }
    paths.push_back(tree.path_to_leaf(pick));
  }
  return paths;
}

std::vector<std::vector<Point2>> InferenceResult::hypotheses() const {
  if (branches.empty()) return {trunk};
  std::vector<std::vector<Point2>> out;
  out.reserve(branches.size());
  for (const auto& branch : branches) {
    std::vector<Point2> seq = trunk;
    seq.insert(seq.end(), branch.begin(), branch.end());
    out.push_back(std::move(seq));
  }
  return out;
}

InferenceResult infer(const GeneratorModel& model, std::span<const Point2> seed,
                      const InferenceConfig& config) {
  require(!seed.empty(), "infer: empty seed sequence");
  config.validate();
  const int m = model.num_hypotheses();
  const int l = config.total_steps;

  rnn::LstmState state = rnn::LstmState::zero(model.lstm.hidden_dim);
  for (const Point2& p : seed) state = consume(model, state, p);
  Point2 current = seed.back();

  InferenceResult result;
  std::vector<rnn::LstmState> branch_state;
  int steps = 0;

  while (steps < l && result.split_step < 0) {
    const PredTree tree = build_tree(model, current, state, config.tree_depth);
    if (m >= 2 && check_split(tree, config.split_threshold)) {
      const auto paths = choose_tree_paths(tree, current);
      const int take = std::min(config.tree_depth, l - steps);
      result.split_step = steps;
      result.branches.resize(static_cast<std::size_t>(m));
      branch_state.assign(static_cast<std::size_t>(m), state);
      for (int j = 0; j < m; ++j) {
        auto& branch = result.branches[static_cast<std::size_t>(j)];
        branch.assign(paths[static_cast<std::size_t>(j)].begin(),
                      paths[static_cast<std::size_t>(j)].begin() + take);
        for (const Point2& p : branch) {
          branch_state[static_cast<std::size_t>(j)] =
              consume(model, branch_state[static_cast<std::size_t>(j)], p);
        }
      }
      steps += take;
    } else {
      const Point2 merged = merge(tree.levels.front());
      result.trunk.push_back(merged);
      state = consume(model, state, merged);
      current = merged;
      steps += 1;
    }
  }

  while (steps < l) {
    for (int j = 0; j < m; ++j) {
      auto& branch = result.branches[static_cast<std::size_t>(j)];
      rnn::LstmState& bs = branch_state[static_cast<std::size_t>(j)];
      const PredTree one = build_tree(model, branch.back(), bs, 1);
      const Point2 merged = merge(one.levels.front());
      branch.push_back(merged);
      bs = consume(model, bs, merged);
    }
    steps += 1;
  }
  return result;
}

}  // namespace mhp::models
