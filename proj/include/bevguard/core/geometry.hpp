#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace bevguard {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;

  double norm() const { return std::hypot(x, y); }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Four BEV corners packed as [x1, y1, ..., x4, y4].
using Corners = std::array<double, 8>;

inline Vec2 corner(const Corners& c, int k) { return {c[2 * k], c[2 * k + 1]}; }

/// Corners of an oriented rectangle, counter-clockwise from the front-left corner.
Corners make_corners(Vec2 center, double heading, double length, double width);

Vec2 corners_center(const Corners& c);

/// Signed shoelace area; positive for counter-clockwise order.
double signed_area(std::span<const Vec2> poly);

/// True when the quadrilateral is strictly convex with positive area (either orientation).
bool is_convex_quad(const Corners& c);

bool point_in_quad(const Corners& c, Vec2 p);

/// Intersection area of two convex polygons (any orientation).
double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b);

/// Polygon IoU of two convex quadrilaterals.
double quad_iou(const Corners& a, const Corners& b);

std::array<Vec2, 4> to_points(const Corners& c);

}  // namespace bevguard
