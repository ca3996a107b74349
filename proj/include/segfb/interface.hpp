#pragma once

// Free-boundary extraction on the trace plane for two-component configurations.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "segfb/errors.hpp"
#include "segfb/grid.hpp"

namespace segfb {

inline constexpr double kSupportThreshold = 1e-8;

/// Trace points where the support of u_1 meets the support of u_2, sorted
/// lexicographically by (x_1, ..., x_n).
struct InterfacePointSet {
  int n = 2;
  double h = 0.0;
  std::vector<Point> points;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

namespace detail {

inline int support_label(const Configuration& u, std::size_t i, double theta) {
  const double a = u[0][i], b = u[1][i];
  if (a > theta && a >= b) return 1;
  if (b > theta) return -1;
  return 0;
}

}  // namespace detail

/// Sign changes of u_1^2 - u_2^2 along trace edges, located by linear
/// interpolation, plus nodes where both components vanish and that touch
/// both supports.
inline InterfacePointSet extract_free_boundary(const Configuration& u, double theta = kSupportThreshold) {
  if (u.k() != 2) throw PreconditionError("free-boundary extraction needs exactly two components");
  const auto& g = u.grid();
  const int n = g.n();
  InterfacePointSet out;
  out.n = n;
  out.h = g.h();
  auto sq = [&](std::size_t i) { return u[0][i] * u[0][i] - u[1][i] * u[1][i]; };
  for (std::size_t i = 0; i < g.size(); i += static_cast<std::size_t>(g.count(n))) {
    const auto m = g.multi_index(i);
    const int li = detail::support_label(u, i, theta);
    bool touches_plus = false, touches_minus = false;
    for (int a = 0; a < n; ++a) {
      for (int dir : {-1, 1}) {
        const int mj = m[a] + dir;
        if (mj < 0 || mj >= g.count(a)) continue;
        const std::size_t j = dir > 0 ? i + g.stride(a) : i - g.stride(a);
        const int lj = detail::support_label(u, j, theta);
        if (lj > 0) touches_plus = true;
        if (lj < 0) touches_minus = true;
        if (dir > 0 && li != 0 && lj == -li) {
          const double di = sq(i), dj = sq(j);
          const double s = di / (di - dj);
          Point p = g.coords(m);
          p[a] += s * g.h();
          out.points.push_back(p);
        }
      }
    }
    if (li == 0 && touches_plus && touches_minus) out.points.push_back(g.coords(m));
  }
  std::sort(out.points.begin(), out.points.end(), [n](const Point& p, const Point& q) {
    for (int a = 0; a < n; ++a)
      if (p[a] != q[a]) return p[a] < q[a];
    return false;
  });
  if (out.points.empty()) throw PreconditionError("empty interface: supports do not meet on the trace");
  return out;
}

/// Distance from a point of R^{n+1} to the nearest interface point.
inline double distance_to_interface(const InterfacePointSet& fb, const Point& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : fb.points) best = std::min(best, distance(p, x, fb.n + 1));
  return best;
}

}  // namespace segfb
