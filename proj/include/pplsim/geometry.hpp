#pragma once

#include <cmath>

#include "pplsim/error.hpp"

namespace pplsim {

/// A point on a perplexity curve: (word index, log PPL).
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline double chord_length(Point p, Point q) noexcept { return std::hypot(q.x - p.x, q.y - p.y); }

/// Unsigned triangle area by the determinant (shoelace) formula.
inline double triangle_area(Point p1, Point p2, Point p3) noexcept {
  const double cross = (p2.x - p1.x) * (p3.y - p1.y) - (p3.x - p1.x) * (p2.y - p1.y);
  return 0.5 * std::abs(cross);
}

/// Product of the three side lengths.
inline double chord_product(Point p1, Point p2, Point p3) noexcept {
  return chord_length(p1, p2) * chord_length(p2, p3) * chord_length(p1, p3);
}

/// Menger curvature 4A / (|p1p2| |p2p3| |p1p3|), the reciprocal of the
/// circumradius; zero for collinear points.
inline double menger_curvature(Point p1, Point p2, Point p3) {
  if (p1 == p2 || p2 == p3 || p1 == p3) {
    throw Error(ErrorKind::DegeneratePoints, "Menger curvature needs three distinct points");
  }
  const double area = triangle_area(p1, p2, p3);
  if (area == 0.0) return 0.0;
  return 4.0 * area / chord_product(p1, p2, p3);
}

}  // namespace pplsim
