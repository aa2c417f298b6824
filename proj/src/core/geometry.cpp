#include "bevguard/core/geometry.hpp"

#include <algorithm>

#include "bevguard/core/grid.hpp"

namespace bevguard {

Corners make_corners(Vec2 center, double heading, double length, double width) {
  const Vec2 f{std::cos(heading), std::sin(heading)};
  const Vec2 l{-f.y, f.x};
  const Vec2 hf = (0.5 * length) * f;
  const Vec2 hl = (0.5 * width) * l;
  const std::array<Vec2, 4> pts{center + hf + hl, center - hf + hl, center - hf - hl,
                                center + hf - hl};
  Corners c{};
  for (int k = 0; k < 4; ++k) {
    c[2 * k] = pts[k].x;
    c[2 * k + 1] = pts[k].y;
  }
  return c;
}

std::array<Vec2, 4> to_points(const Corners& c) {
  return {corner(c, 0), corner(c, 1), corner(c, 2), corner(c, 3)};
}

Vec2 corners_center(const Corners& c) {
  return {(c[0] + c[2] + c[4] + c[6]) / 4.0, (c[1] + c[3] + c[5] + c[7]) / 4.0};
}

double signed_area(std::span<const Vec2> poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

bool is_convex_quad(const Corners& c) {
  const auto p = to_points(c);
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double z = cross(p[(i + 1) % 4] - p[i], p[(i + 2) % 4] - p[(i + 1) % 4]);
    if (!std::isfinite(z) || std::abs(z) < 1e-12) return false;
    const int s = z > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return std::abs(signed_area(p)) > 1e-12;
}

bool point_in_quad(const Corners& c, Vec2 p) {
  const auto q = to_points(c);
  bool pos = false;
  bool neg = false;
  for (int i = 0; i < 4; ++i) {
    const double z = cross(q[(i + 1) % 4] - q[i], p - q[i]);
    if (z > 0) pos = true;
    if (z < 0) neg = true;
    if (pos && neg) return false;
  }
  return true;
}

namespace {

std::vector<Vec2> ccw(std::span<const Vec2> poly) {
  std::vector<Vec2> out(poly.begin(), poly.end());
  if (signed_area(out) < 0) std::reverse(out.begin(), out.end());
  return out;
}

// Sutherland-Hodgman against one directed edge of a CCW clip polygon.
std::vector<Vec2> clip_edge(const std::vector<Vec2>& subject, Vec2 a, Vec2 b) {
  std::vector<Vec2> out;
  out.reserve(subject.size() + 2);
  const Vec2 e = b - a;
  const std::size_t n = subject.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p = subject[i];
    const Vec2 q = subject[(i + 1) % n];
    const double sp = cross(e, p - a);
    const double sq = cross(e, q - a);
    if (sp >= 0) out.push_back(p);
    if ((sp >= 0) != (sq >= 0)) {
      const double t = sp / (sp - sq);
      out.push_back(p + t * (q - p));
    }
  }
  return out;
}

}  // namespace

double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  std::vector<Vec2> subject = ccw(a);
  const std::vector<Vec2> clip = ccw(b);
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    subject = clip_edge(subject, clip[i], clip[(i + 1) % clip.size()]);
  }
  if (subject.size() < 3) return 0.0;
  return std::max(0.0, signed_area(subject));
}

double quad_iou(const Corners& a, const Corners& b) {
  const auto pa = to_points(a);
  const auto pb = to_points(b);
  double ax0 = pa[0].x, ax1 = pa[0].x, ay0 = pa[0].y, ay1 = pa[0].y;
  double bx0 = pb[0].x, bx1 = pb[0].x, by0 = pb[0].y, by1 = pb[0].y;
  for (int i = 1; i < 4; ++i) {
    ax0 = std::min(ax0, pa[i].x), ax1 = std::max(ax1, pa[i].x);
    ay0 = std::min(ay0, pa[i].y), ay1 = std::max(ay1, pa[i].y);
    bx0 = std::min(bx0, pb[i].x), bx1 = std::max(bx1, pb[i].x);
    by0 = std::min(by0, pb[i].y), by1 = std::max(by1, pb[i].y);
  }
  if (ax1 <= bx0 || bx1 <= ax0 || ay1 <= by0 || by1 <= ay0) return 0.0;
  const double area_a = std::abs(signed_area(pa));
  const double area_b = std::abs(signed_area(pb));
  const double inter = convex_intersection_area(pa, pb);
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double GridSpec::diagonal() const {
  return std::sqrt(static_cast<double>(rows) * rows + static_cast<double>(cols) * cols);
}

Cell cell_of(const GridSpec& g, Vec2 p) {
  const int col = std::clamp(static_cast<int>(std::floor(p.x)), 0, g.cols - 1);
  const int row = std::clamp(static_cast<int>(std::floor(p.y)), 0, g.rows - 1);
  return {row, col};
}

}  // namespace bevguard
