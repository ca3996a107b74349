#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>

namespace segfb {

/// Largest supported ambient dimension n + 1 (trace dimension n <= 3).
inline constexpr int kMaxDim = 4;

/// A point of R^{n+1}. Coordinates are (x_1, ..., x_n, z); entries beyond
/// n + 1 are unused and kept at zero.
using Point = std::array<double, kMaxDim>;

inline Point make_point(std::initializer_list<double> coords) {
  Point p{};
  std::size_t i = 0;
  for (double c : coords) {
    if (i >= p.size()) break;
    p[i++] = c;
  }
  return p;
}

/// Euclidean norm of the first `dim` coordinates.
inline double norm(const Point& p, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s += p[a] * p[a];
  return std::sqrt(s);
}

inline double distance(const Point& p, const Point& q, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) {
    const double d = p[a] - q[a];
    s += d * d;
  }
  return std::sqrt(s);
}

/// Squared norm of the tangential part x' = (x_1, ..., x_{n-1}).
inline double tangential_norm2(const Point& p, int n) {
  double s = 0.0;
  for (int a = 0; a + 1 < n; ++a) s += p[a] * p[a];
  return s;
}

/// Distance r = sqrt(x_n^2 + z^2) to the edge L = {x_n = 0, z = 0}.
inline double edge_distance(const Point& p, int n) { return std::hypot(p[n - 1], p[n]); }

}  // namespace segfb
