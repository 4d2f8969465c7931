#include <algorithm>
#include <sstream>

#include "mhp/error.hpp"
#include "mhp/harness.hpp"

namespace mhp::harness {

namespace {

constexpr const char* kObservedColor = "#1f77b4";
constexpr const char* kTruthColor = "#2ca02c";
constexpr const char* kHypothesisColor = "#ffbf00";

struct Bounds {
  double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
  bool any = false;

  void cover(const Point2& p) {
    if (!any) {
      min_x = max_x = p.x;
      min_y = max_y = p.y;
      any = true;
      return;
    }
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
};

void emit_sequence(std::ostringstream& out, const std::vector<Point2>& seq, const char* color,
                   double stroke, double radius) {
  if (seq.empty()) return;
  if (seq.size() == 1) {
    out << "  <circle cx=\"" << seq[0].x << "\" cy=\"" << -seq[0].y << "\" r=\"" << radius
        << "\" fill=\"" << color << "\"/>\n";
    return;
  }
  out << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke
      << "\" points=\"";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out << ' ';
    out << seq[i].x << ',' << -seq[i].y;  // map y-up becomes SVG y-down
  }
  out << "\"/>\n";
}

}  // namespace

std::string plot_scene_svg(const std::vector<Point2>& observed,
                           const std::vector<Point2>& truth,
                           const std::vector<std::vector<Point2>>& hypotheses) {
  Bounds b;
  for (const Point2& p : observed) b.cover({p.x, -p.y});
  for (const Point2& p : truth) b.cover({p.x, -p.y});
  for (const auto& h : hypotheses) {
    for (const Point2& p : h) b.cover({p.x, -p.y});
  }
  require(b.any, "plot_scene_svg: empty scene");

  double w = b.max_x - b.min_x;
  double h = b.max_y - b.min_y;
  const double pad_x = w > 0.0 ? 0.05 * w : 1.0;
  const double pad_y = h > 0.0 ? 0.05 * h : 1.0;
  const double extent = std::max(w + 2 * pad_x, h + 2 * pad_y);
  const double stroke = extent * 0.006;
  const double radius = extent * 0.01;

  std::ostringstream out;
  out.precision(10);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << (b.min_x - pad_x) << ' '
      << (b.min_y - pad_y) << ' ' << (w + 2 * pad_x) << ' ' << (h + 2 * pad_y) << "\">\n";
  for (const auto& hyp : hypotheses) {
    emit_sequence(out, hyp, kHypothesisColor, stroke, radius);
  }
  emit_sequence(out, truth, kTruthColor, stroke, radius);
  emit_sequence(out, observed, kObservedColor, stroke, radius);
  out << "</svg>\n";
  return out.str();
}

}  // namespace mhp::harness
