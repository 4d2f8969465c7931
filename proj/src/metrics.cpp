#include "mhp/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mhp::metrics {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

}  // namespace

std::pair<double, double> fde_ade(std::span<const Point2> predicted,
                                  std::span<const Point2> truth) {
  require(predicted.size() == truth.size(), "fde_ade: length mismatch");
  require(!predicted.empty(), "fde_ade: empty sequences");
  double acc = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    acc += distance(predicted[t], truth[t]);
  }
  const double final_err = distance(predicted.back(), truth.back());
  return {final_err, acc / static_cast<double>(predicted.size())};
}

bool Polytope::contains(std::span<const double> x) const {
  require(x.size() == lower.size(), "polytope: dimension mismatch");
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x[d] < lower[d] || x[d] > upper[d]) return false;
  }
  return true;
}

Polytope fit_polytope(const std::vector<std::vector<double>>& class_samples, double tau,
                      int class_id) {
  require(!class_samples.empty(), "fit_polytope: no samples for class");
  require(tau > 0.0 && tau <= 1.0, "fit_polytope: tau must be in (0, 1]");
  const std::size_t dim = class_samples.front().size();
  for (const auto& s : class_samples) {
    require(s.size() == dim, "fit_polytope: inconsistent sample dimensions");
  }
  Polytope p;
  p.class_id = class_id;
  p.tau = tau;
  p.lower.resize(dim);
  p.upper.resize(dim);
  std::vector<double> column(class_samples.size());
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < class_samples.size(); ++i) column[i] = class_samples[i][d];
    std::sort(column.begin(), column.end());
    p.lower[d] = quantile_sorted(column, (1.0 - tau) / 2.0);
    p.upper[d] = quantile_sorted(column, (1.0 + tau) / 2.0);
  }
  return p;
}

std::vector<std::set<int>> relabel_discrete(const std::vector<std::vector<double>>& samples,
                                            const std::vector<int>& labels,
                                            const std::vector<Polytope>& polytopes) {
  require(samples.size() == labels.size(), "relabel_discrete: one label per sample");
  std::vector<std::set<int>> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i].insert(labels[i]);
    for (const Polytope& p : polytopes) {
      if (p.contains(samples[i])) out[i].insert(p.class_id);
    }
  }
  return out;
}

std::pair<double, double> pr_re(const std::set<int>& predicted, const std::set<int>& labels) {
  require(!predicted.empty(), "pr_re: empty prediction set");
  require(!labels.empty(), "pr_re: empty label set");
  std::size_t hits = 0;
  for (int c : predicted) hits += labels.count(c);
  const double h = static_cast<double>(hits);
  return {h / static_cast<double>(predicted.size()), h / static_cast<double>(labels.size())};
}

double auto_bandwidth(const std::vector<std::vector<double>>& points) {
  require(!points.empty(), "auto_bandwidth: no points");
  // Deterministic subsample: evenly strided, at most 500 points.
  const std::size_t target = 500;
  const std::size_t stride = std::max<std::size_t>(1, points.size() / target);
  std::vector<const std::vector<double>*> sub;
  for (std::size_t i = 0; i < points.size() && sub.size() < target; i += stride) {
    sub.push_back(&points[i]);
  }
  std::vector<double> dists;
  dists.reserve(sub.size() * (sub.size() - 1) / 2);
  for (std::size_t i = 0; i < sub.size(); ++i) {
    for (std::size_t j = i + 1; j < sub.size(); ++j) {
      dists.push_back(std::sqrt(sq_dist(*sub[i], *sub[j])));
    }
  }
  if (dists.empty()) return 1e-6;
  std::sort(dists.begin(), dists.end());
  const double median = quantile_sorted(dists, 0.5);
  return std::max(0.5 * median, 1e-6);
}

ClusterModel mean_shift(const std::vector<std::vector<double>>& points, double bandwidth) {
  require(!points.empty(), "mean_shift: no points");
  require(bandwidth > 0.0, "mean_shift: bandwidth must be positive");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  const double bw_sq = bandwidth * bandwidth;
  const double tol = 1e-3 * bandwidth;
  constexpr int kMaxIters = 500;

  std::vector<std::vector<double>> modes(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> mode = points[i];
    std::vector<double> next(dim);
    for (int iter = 0; iter < kMaxIters; ++iter) {
      std::fill(next.begin(), next.end(), 0.0);
      std::size_t count = 0;
      for (const auto& p : points) {
        if (sq_dist(mode, p) <= bw_sq) {
          for (std::size_t d = 0; d < dim; ++d) next[d] += p[d];
          ++count;
        }
      }
      for (std::size_t d = 0; d < dim; ++d) next[d] /= static_cast<double>(count);
      const double moved = std::sqrt(sq_dist(mode, next));
      mode = next;
      if (moved < tol) break;
    }
    modes[i] = std::move(mode);
  }

  // Merge converged modes closer than bandwidth/2, keeping the first seen.
  ClusterModel model;
  model.bandwidth = bandwidth;
  model.assignment.resize(n, -1);
  const double merge_sq = 0.25 * bw_sq;
  for (std::size_t i = 0; i < n; ++i) {
    int found = -1;
    for (std::size_t c = 0; c < model.centers.size(); ++c) {
      if (sq_dist(modes[i], model.centers[c]) <= merge_sq) {
        found = static_cast<int>(c);
        break;
      }
    }
    if (found < 0) {
      model.centers.push_back(modes[i]);
      found = static_cast<int>(model.centers.size()) - 1;
    }
    model.assignment[i] = found;
  }
  return model;
}

std::vector<std::vector<int>> relabel_continuous(
    const std::vector<std::vector<double>>& inputs,
    const std::vector<Polytope>& cluster_boxes) {
  require(!cluster_boxes.empty(), "relabel_continuous: no cluster polytopes");
  std::vector<std::vector<int>> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t c = 0; c < cluster_boxes.size(); ++c) {
      if (cluster_boxes[c].contains(inputs[i])) {
        out[i].push_back(static_cast<int>(c));
      }
    }
    if (out[i].empty()) {
      // Nearest box in the input space stands in for the sample's own cluster.
      std::size_t best = 0;
      double best_d = -1.0;
      for (std::size_t c = 0; c < cluster_boxes.size(); ++c) {
        double d = 0.0;
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
          const double v = inputs[i][k];
          const double gap = std::max({cluster_boxes[c].lower[k] - v,
                                       v - cluster_boxes[c].upper[k], 0.0});
          d += gap * gap;
        }
        if (best_d < 0.0 || d < best_d) {
          best_d = d;
          best = c;
        }
      }
      out[i].push_back(static_cast<int>(best));
    }
  }
  return out;
}

std::vector<double> flatten(std::span<const Point2> seq) {
  std::vector<double> out;
  out.reserve(seq.size() * 2);
  for (const Point2& p : seq) {
    out.push_back(p.x);
    out.push_back(p.y);
  }
  return out;
}

std::vector<Point2> unflatten(std::span<const double> flat) {
  require(flat.size() % 2 == 0, "unflatten: odd length");
  std::vector<Point2> out;
  out.reserve(flat.size() / 2);
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    out.push_back({flat[i], flat[i + 1]});
  }
  return out;
}

}  // namespace mhp::metrics
