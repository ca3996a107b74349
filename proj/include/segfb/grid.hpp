#pragma once

// Uniform tensor grids over z-symmetric extension boxes [lo, hi]^n x [0, zmax].
// Only z >= 0 is stored; values below the trace plane are implied by even
// reflection.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "segfb/errors.hpp"
#include "segfb/point.hpp"

namespace segfb {

using MultiIndex = std::array<int, kMaxDim>;

class ExtensionGrid {
 public:
  ExtensionGrid() = default;

  /// Axes 0..n-1 span [lower[a], upper[a]], axis n spans [0, zmax].
  ExtensionGrid(int n, std::vector<double> lower, std::vector<double> upper, double zmax, double h)
      : n_(n), h_(h) {
    if (n < 1 || n + 1 > kMaxDim) throw ConfigError("trace dimension must be in [1, " + std::to_string(kMaxDim - 1) + "]");
    if (!(h > 0.0)) throw ConfigError("grid spacing must be positive");
    if (lower.size() != static_cast<std::size_t>(n) || upper.size() != static_cast<std::size_t>(n))
      throw ConfigError("grid extents must have one entry per trace axis");
    for (int a = 0; a < n; ++a) {
      lower_[a] = lower[a];
      upper_[a] = upper[a];
    }
    lower_[n] = 0.0;
    upper_[n] = zmax;
    std::size_t stride = 1;
    for (int a = n; a >= 0; --a) {
      const double cells = (upper_[a] - lower_[a]) / h;
      const double rounded = std::round(cells);
      if (!(rounded >= 1.0) || std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
        throw ConfigError("grid extent on axis " + std::to_string(a) + " is not a positive multiple of h");
      count_[a] = static_cast<int>(rounded) + 1;
      stride_[a] = stride;
      stride *= static_cast<std::size_t>(count_[a]);
    }
    size_ = stride;
    const double ln = -lower_[n - 1] / h;
    if (std::abs(ln - std::round(ln)) > 1e-9 || lower_[n - 1] > 0.0 || upper_[n - 1] < 0.0)
      throw ConfigError("the edge x_n = 0 must lie on grid nodes");
  }

  /// The box [-half_width, half_width]^n x [0, zmax].
  static ExtensionGrid box(int n, double half_width, double zmax, double h) {
    return ExtensionGrid(n, std::vector<double>(n, -half_width), std::vector<double>(n, half_width), zmax, h);
  }

  int n() const { return n_; }
  int dim() const { return n_ + 1; }
  double h() const { return h_; }
  std::size_t size() const { return size_; }
  int count(int axis) const { return count_[axis]; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return upper_[axis]; }
  double zmax() const { return upper_[n_]; }

  MultiIndex multi_index(std::size_t idx) const {
    MultiIndex m{};
    for (int a = 0; a <= n_; ++a) {
      m[a] = static_cast<int>(idx / stride_[a]);
      idx %= stride_[a];
    }
    return m;
  }

  std::size_t index(const MultiIndex& m) const {
    std::size_t idx = 0;
    for (int a = 0; a <= n_; ++a) idx += static_cast<std::size_t>(m[a]) * stride_[a];
    return idx;
  }

  double coord(int axis, int i) const { return lower_[axis] + i * h_; }

  Point coords(std::size_t idx) const { return coords(multi_index(idx)); }
  Point coords(const MultiIndex& m) const {
    Point p{};
    for (int a = 0; a <= n_; ++a) p[a] = coord(a, m[a]);
    return p;
  }

  /// Node index nearest to a point (clamped into the box).
  MultiIndex nearest(const Point& p) const {
    MultiIndex m{};
    for (int a = 0; a <= n_; ++a) {
      const double pa = a == n_ ? std::abs(p[a]) : p[a];
      m[a] = std::clamp(static_cast<int>(std::lround((pa - lower_[a]) / h_)), 0, count_[a] - 1);
    }
    return m;
  }

  bool on_trace(const MultiIndex& m) const { return m[n_] == 0; }
  bool on_trace(std::size_t idx) const { return idx % static_cast<std::size_t>(count_[n_]) == 0; }

  /// Dirichlet part of the boundary: side walls and the top face. The trace
  /// plane z = 0 is a symmetry plane, not a boundary.
  bool on_dirichlet_boundary(const MultiIndex& m) const {
    for (int a = 0; a < n_; ++a)
      if (m[a] == 0 || m[a] == count_[a] - 1) return true;
    return m[n_] == count_[n_] - 1;
  }
  bool on_dirichlet_boundary(std::size_t idx) const { return on_dirichlet_boundary(multi_index(idx)); }

  /// x_n coordinate index of the edge L.
  int edge_index() const { return static_cast<int>(std::lround(-lower_[n_ - 1] / h_)); }

  bool on_L(const MultiIndex& m) const { return m[n_] == 0 && m[n_ - 1] == edge_index(); }
  bool in_P_plus(const MultiIndex& m) const { return m[n_] == 0 && m[n_ - 1] >= edge_index(); }
  bool in_P_minus(const MultiIndex& m) const { return m[n_] == 0 && m[n_ - 1] <= edge_index(); }

  /// True when the closed ball of radius r about a trace point fits in the box.
  bool contains_ball(const Point& center, double r, double slack = 1e-12) const {
    for (int a = 0; a < n_; ++a)
      if (center[a] - r < lower_[a] - slack || center[a] + r > upper_[a] + slack) return false;
    return r <= upper_[n_] + slack;
  }

  bool contains(const Point& p, double slack = 1e-12) const {
    for (int a = 0; a < n_; ++a)
      if (p[a] < lower_[a] - slack || p[a] > upper_[a] + slack) return false;
    return std::abs(p[n_]) <= upper_[n_] + slack;
  }

  bool operator==(const ExtensionGrid& o) const {
    if (n_ != o.n_ || h_ != o.h_) return false;
    for (int a = 0; a <= n_; ++a)
      if (lower_[a] != o.lower_[a] || upper_[a] != o.upper_[a]) return false;
    return true;
  }

 private:
  int n_ = 1;
  double h_ = 1.0;
  std::array<double, kMaxDim> lower_{};
  std::array<double, kMaxDim> upper_{};
  std::array<int, kMaxDim> count_{};
  std::array<std::size_t, kMaxDim> stride_{};
  std::size_t size_ = 0;
};

/// One real value per stored node; even in z by convention.
struct ScalarField {
  ExtensionGrid grid;
  std::vector<double> values;
  bool even_z = true;

  ScalarField() = default;
  explicit ScalarField(const ExtensionGrid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }
};

/// Samples fn at every node.
template <class Fn>
ScalarField sample(const ExtensionGrid& grid, const Fn& fn) {
  ScalarField f(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) f[i] = fn(grid.coords(i));
  return f;
}

enum class ConfigurationMode { Penalized, Segregated };

/// k-tuple of fields on a common grid.
struct Configuration {
  std::vector<ScalarField> components;
  ConfigurationMode mode = ConfigurationMode::Segregated;
  double beta = 0.0;

  std::size_t k() const { return components.size(); }
  const ExtensionGrid& grid() const {
    if (components.empty()) throw PreconditionError("empty configuration");
    return components.front().grid;
  }
  ScalarField& operator[](std::size_t i) { return components[i]; }
  const ScalarField& operator[](std::size_t i) const { return components[i]; }
};

inline Configuration make_configuration(std::vector<ScalarField> comps,
                                        ConfigurationMode mode = ConfigurationMode::Segregated) {
  Configuration c;
  c.components = std::move(comps);
  c.mode = mode;
  for (const auto& f : c.components)
    if (!(f.grid == c.components.front().grid)) throw PreconditionError("configuration components on different grids");
  return c;
}

/// Nodewise segregation on the trace: at most one component above `threshold`.
inline bool is_segregated(const Configuration& c, double threshold = 0.0) {
  const auto& g = c.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.on_trace(g.multi_index(i))) continue;
    int positive = 0;
    for (const auto& f : c.components)
      if (f[i] > threshold) ++positive;
    if (positive > 1) return false;
  }
  return true;
}

/// Every other node of `f` as a field on the grid of spacing 2h over the same
/// box. Requires an even cell count on every axis.
inline ScalarField coarsen(const ScalarField& f) {
  const auto& g = f.grid;
  const int n = g.n();
  std::vector<double> lo(n), hi(n);
  for (int a = 0; a < n; ++a) {
    if ((g.count(a) - 1) % 2 != 0) throw PreconditionError("coarsening needs even cell counts");
    lo[a] = g.lower(a);
    hi[a] = g.upper(a);
  }
  if ((g.count(n) - 1) % 2 != 0) throw PreconditionError("coarsening needs even cell counts");
  ScalarField c(ExtensionGrid(n, lo, hi, g.zmax(), 2.0 * g.h()));
  c.even_z = f.even_z;
  for (std::size_t i = 0; i < c.size(); ++i) {
    auto m = c.grid.multi_index(i);
    for (int a = 0; a <= n; ++a) m[a] *= 2;
    c[i] = f[g.index(m)];
  }
  return c;
}

inline Configuration coarsen(const Configuration& u) {
  Configuration c = u;
  for (auto& f : c.components) f = coarsen(f);
  return c;
}

// ---------------------------------------------------------------------------
// Discrete calculus

/// Second-order (2n+3)-point Laplacian. On the trace the lower z-neighbour is
/// the reflected node above.
inline double discrete_laplacian(const ScalarField& f, const MultiIndex& m) {
  const auto& g = f.grid;
  const int n = g.n();
  for (int a = 0; a < n; ++a)
    if (m[a] <= 0 || m[a] >= g.count(a) - 1) throw PreconditionError("Laplacian requested on a side-wall node");
  if (m[n] < 0 || m[n] >= g.count(n) - 1) throw PreconditionError("Laplacian requested outside the stored half-grid");
  const std::size_t i = g.index(m);
  const double c = f[i];
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += f[i + g.stride(a)] + f[i - g.stride(a)] - 2.0 * c;
  const double up = f[i + g.stride(n)];
  const double down = m[n] == 0 ? up : f[i - g.stride(n)];
  s += up + down - 2.0 * c;
  return s / (g.h() * g.h());
}

/// Multilinear interpolation; z < 0 is handled by evenness.
inline double interpolate(const ScalarField& f, const Point& p) {
  const auto& g = f.grid;
  const int dim = g.dim();
  if (!g.contains(p, 1e-9 * g.h())) throw PreconditionError("interpolation point outside the box");
  std::array<int, kMaxDim> base{};
  std::array<double, kMaxDim> frac{};
  for (int a = 0; a < dim; ++a) {
    const double pa = a == dim - 1 ? std::abs(p[a]) : p[a];
    const double s = (pa - g.lower(a)) / g.h();
    int b = static_cast<int>(std::floor(s));
    b = std::clamp(b, 0, g.count(a) - 2);
    base[a] = b;
    frac[a] = std::clamp(s - b, 0.0, 1.0);
  }
  std::size_t origin = 0;
  for (int a = 0; a < dim; ++a) origin += static_cast<std::size_t>(base[a]) * g.stride(a);
  double acc = 0.0;
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t idx = origin;
    for (int a = 0; a < dim; ++a) {
      if (c & (1 << a)) {
        w *= frac[a];
        idx += g.stride(a);
      } else {
        w *= 1.0 - frac[a];
      }
    }
    if (w != 0.0) acc += w * f[idx];
  }
  return acc;
}

/// Nodal gradient by centred differences (mirror ghost at z = 0, one-sided
/// differences on the box faces). Returns one field per axis.
inline std::vector<ScalarField> nodal_gradient(const ScalarField& f) {
  const auto& g = f.grid;
  const int dim = g.dim();
  std::vector<ScalarField> out(dim, ScalarField(g));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi_index(i);
    for (int a = 0; a < dim; ++a) {
      const std::size_t s = g.stride(a);
      const bool lo = m[a] == 0, hi = m[a] == g.count(a) - 1;
      double d;
      if (a == dim - 1 && lo) {
        d = 0.0;  // even reflection
      } else if (lo) {
        d = (f[i + s] - f[i]) / g.h();
      } else if (hi) {
        d = (f[i] - f[i - s]) / g.h();
      } else {
        d = (f[i + s] - f[i - s]) / (2.0 * g.h());
      }
      out[a][i] = d;
    }
  }
  return out;
}

/// Gradient of the multilinear interpolant at the centre of the cell whose
/// lowest corner is `base` and whose side is `span` grid steps: the average of
/// the 2^n parallel edge differences.
inline std::array<double, kMaxDim> cell_gradient(const ScalarField& f, const MultiIndex& base, int span = 1) {
  const auto& g = f.grid;
  const int dim = g.dim();
  const std::size_t origin = g.index(base);
  std::array<double, kMaxDim> grad{};
  const int corners = 1 << dim;
  for (int c = 0; c < corners; ++c) {
    std::size_t idx = origin;
    for (int a = 0; a < dim; ++a)
      if (c & (1 << a)) idx += span * g.stride(a);
    const double v = f[idx];
    for (int a = 0; a < dim; ++a) grad[a] += (c & (1 << a)) ? v : -v;
  }
  const double scale = 1.0 / (span * g.h() * (corners / 2));
  for (int a = 0; a < dim; ++a) grad[a] *= scale;
  return grad;
}

// ---------------------------------------------------------------------------
// Quadrature

inline constexpr int kDefaultAngularSamples = 2048;
inline constexpr int kBallSubsamples = 8;

/// Integral over the full ball B_r(center) (center on the trace), computed
/// from the stored half by evenness. Cells have side `span` * h and start at
/// multiples of `span`; `cell_fn(base, center_point)` returns the integrand at
/// the centre of the cell with lowest corner `base`. Cells cut by the sphere
/// are weighted by the fraction of `subsamples`^{n+1} points inside the ball.
template <class CellFn>
double quad_ball_cells(const ExtensionGrid& g, const CellFn& cell_fn, const Point& center, double r, int span = 1,
                       int subsamples = kBallSubsamples) {
  const int n = g.n();
  const int dim = g.dim();
  if (center[n] != 0.0) throw PreconditionError("ball quadrature requires a centre on the trace");
  if (!g.contains_ball(center, r)) throw PreconditionError("ball exceeds the box");
  if (span < 1 || subsamples < 1) throw PreconditionError("invalid quadrature cell layout");
  const double h = g.h() * span;
  std::array<int, kMaxDim> lo{}, hi{};
  for (int a = 0; a < dim; ++a) {
    const double c = a == n ? 0.0 : center[a];
    const int cells = (g.count(a) - 1) / span;
    lo[a] = std::max(0, static_cast<int>(std::floor((c - r - g.lower(a)) / h)));
    hi[a] = std::min(cells - 1, static_cast<int>(std::floor((c + r - g.lower(a)) / h)));
    if (lo[a] > hi[a]) return 0.0;
  }
  const double r2 = r * r;
  int sub = 1;
  for (int a = 0; a < dim; ++a) sub *= subsamples;
  std::array<int, kMaxDim> cell = lo;
  double total = 0.0;
  while (true) {
    Point cc{};
    MultiIndex base{};
    double near2 = 0.0, far2 = 0.0;
    for (int a = 0; a < dim; ++a) {
      base[a] = cell[a] * span;
      const double x0 = g.coord(a, base[a]) - center[a];
      const double x1 = x0 + h;
      cc[a] = g.coord(a, base[a]) + 0.5 * h;
      const double nearest = (x0 <= 0.0 && x1 >= 0.0) ? 0.0 : std::min(std::abs(x0), std::abs(x1));
      const double farthest = std::max(std::abs(x0), std::abs(x1));
      near2 += nearest * nearest;
      far2 += farthest * farthest;
    }
    if (near2 < r2) {
      double frac = 1.0;
      if (far2 > r2) {
        int inside = 0;
        for (int s = 0; s < sub; ++s) {
          double d2 = 0.0;
          int rest = s;
          for (int a = 0; a < dim; ++a) {
            const int k = rest % subsamples;
            rest /= subsamples;
            const double x = g.coord(a, base[a]) + (k + 0.5) * h / subsamples - center[a];
            d2 += x * x;
          }
          if (d2 <= r2) ++inside;
        }
        frac = static_cast<double>(inside) / sub;
      }
      if (frac > 0.0) total += frac * cell_fn(base, cc);
    }
    int a = dim - 1;
    while (a >= 0) {
      if (++cell[a] <= hi[a]) break;
      cell[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
  double vol = 1.0;
  for (int a = 0; a < dim; ++a) vol *= h;
  return 2.0 * total * vol;
}

/// Ball integral of a pointwise integrand evaluated at cell centres.
template <class PointFn>
double quad_ball(const ExtensionGrid& g, const PointFn& fn, const Point& center, double r) {
  return quad_ball_cells(g, [&](const MultiIndex&, const Point& p) { return fn(p); }, center, r);
}

/// Unit directions with weights covering the upper half of S^n (z > 0);
/// weights sum to half the sphere measure and callers double the result by
/// evenness. For n = 2 the rule is a midpoint product rule in spherical
/// coordinates whose polar axis is e_1, so the two points where a sphere
/// centred on L meets L are poles: there an r^{-1} singularity is cancelled
/// by the sin(psi) area factor.
struct HemisphereRule {
  std::vector<Point> directions;
  std::vector<double> weights;
};

inline HemisphereRule hemisphere_rule(int n, int n_ang = kDefaultAngularSamples) {
  HemisphereRule rule;
  if (n == 1) {
    const int m = std::max(2, n_ang / 2);
    for (int k = 0; k < m; ++k) {
      const double th = std::numbers::pi * (k + 0.5) / m;
      Point d{};
      d[0] = std::cos(th);
      d[1] = std::sin(th);
      rule.directions.push_back(d);
      rule.weights.push_back(std::numbers::pi / m);
    }
    return rule;
  }
  if (n == 2) {
    const int polar = std::max(4, static_cast<int>(std::lround(std::sqrt(2.0 * n_ang))));
    const int az = std::max(2, n_ang / polar);
    const double dpsi = std::numbers::pi / polar, dphi = std::numbers::pi / az;
    for (int j = 0; j < polar; ++j) {
      const double psi = (j + 0.5) * dpsi;
      const double s = std::sin(psi);
      for (int k = 0; k < az; ++k) {
        const double phi = (k + 0.5) * dphi;
        Point d{};
        d[0] = std::cos(psi);
        d[1] = s * std::cos(phi);
        d[2] = s * std::sin(phi);
        rule.directions.push_back(d);
        rule.weights.push_back(s * dpsi * dphi);
      }
    }
    return rule;
  }
  throw PreconditionError("sphere quadrature supports trace dimension n = 1 or 2");
}

/// Integral over the full sphere dB_r(center), center on the trace: the upper
/// hemisphere is sampled and doubled.
template <class PointFn>
double quad_sphere(const ExtensionGrid& g, const PointFn& fn, const Point& center, double r,
                   int n_ang = kDefaultAngularSamples) {
  const int n = g.n();
  if (center[n] != 0.0) throw PreconditionError("sphere quadrature requires a centre on the trace");
  if (!g.contains_ball(center, r)) throw PreconditionError("sphere exceeds the box");
  const auto rule = hemisphere_rule(n, n_ang);
  const double measure = std::pow(r, n);
  double total = 0.0;
  for (std::size_t k = 0; k < rule.directions.size(); ++k) {
    Point p = center;
    for (int a = 0; a <= n; ++a) p[a] = center[a] + r * rule.directions[k][a];
    total += rule.weights[k] * fn(p, rule.directions[k]);
  }
  return 2.0 * total * measure;
}

/// Measure |S^n| of the unit sphere in R^{n+1}.
inline double unit_sphere_measure(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1));
}

}  // namespace segfb
