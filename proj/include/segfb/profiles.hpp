#pragma once

// Closed-form half-plane profiles U(t,z) = r^{1/2} cos(theta/2), its mirror
// U(-t,z), the radial subsolution family built on a spherical front, and
// numerical epsilon-domain variations against these profiles.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "segfb/errors.hpp"
#include "segfb/point.hpp"

namespace segfb {

/// Plus selects U, Minus selects the mirror profile U(-t, z).
enum class Orientation { Plus, Minus };

namespace detail {

// U(t,z) = sqrt((r + t)/2). For t < 0 the sum r + t is rewritten as
// z^2 / (r - t) so that values near the slit keep full relative precision.
inline double half_plane_value(double t, double z) {
  const double r = std::hypot(t, z);
  if (r == 0.0) return 0.0;
  const double s = t >= 0.0 ? r + t : (z * z) / (r - t);
  return std::sqrt(0.5 * s);
}

}  // namespace detail

struct HalfPlaneProfile {
  Orientation orientation = Orientation::Plus;

  /// Profile value at (t, z); zero on the slit {t <= 0, z = 0} (mirrored for Minus).
  double operator()(double t, double z) const {
    return orientation == Orientation::Plus ? detail::half_plane_value(t, z)
                                            : detail::half_plane_value(-t, z);
  }

  /// (d/dt, d/dz). Throws SingularEvaluation at r = 0 or on the vanishing
  /// half-line, where the profile is not differentiable.
  std::array<double, 2> gradient(double t, double z) const {
    const double r = std::hypot(t, z);
    if (r == 0.0) throw SingularEvaluation("profile gradient requested at r = 0");
    const double ts = orientation == Orientation::Plus ? t : -t;
    if (z == 0.0 && ts < 0.0) throw SingularEvaluation("profile gradient requested on the zero half-line");
    // With V = U(ts, z) and W = U(-ts, z): V_t = V/(2r), V_z = sign(z) W/(2r).
    const double v = detail::half_plane_value(ts, z);
    const double w = detail::half_plane_value(-ts, z);
    const double sz = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
    const double dt = v / (2.0 * r);
    const double dz = sz * w / (2.0 * r);
    return orientation == Orientation::Plus ? std::array<double, 2>{dt, dz}
                                            : std::array<double, 2>{-dt, dz};
  }
};

inline constexpr HalfPlaneProfile kU{Orientation::Plus};
inline constexpr HalfPlaneProfile kUbar{Orientation::Minus};

/// Profile evaluated at a point of R^{n+1} with t = x . nu (nu in the trace
/// hyperplane, unit) and amplitude a.
inline double eval_pair_component(const HalfPlaneProfile& p, const Point& x, int n, const Point& nu,
                                  double amplitude = 1.0, double shift = 0.0) {
  double t = shift;
  for (int a = 0; a < n; ++a) t += x[a] * nu[a];
  return amplitude * p(t, x[n]);
}

// ---------------------------------------------------------------------------
// Radial subsolutions

inline constexpr double kDefaultRMin = 10.0;

struct SubsolutionParams {
  double R = kDefaultRMin;  ///< radius of curvature of the spherical front
  double beta = 0.0;        ///< vertical translation rate
  int n = 2;                ///< trace dimension
};

inline void require_subsolution_params(const SubsolutionParams& p, double r_min = kDefaultRMin) {
  if (!(p.R > 0.0)) throw PreconditionError("subsolution radius must be positive");
  if (p.R < r_min) throw PreconditionError("subsolution radius below R_min = " + std::to_string(r_min));
  if (p.beta < 0.0) throw PreconditionError("subsolution beta must be nonnegative");
  if (p.n < 1 || p.n + 1 > kMaxDim) throw PreconditionError("unsupported trace dimension");
}

/// (1 + beta/R) * V_R(R - rho, z), V_R(t,z) = U(t,z)((n-1)t/R + 1) for
/// component 1 and the mirrored profile for component 2, where
/// rho = |X' - R e_n| is the distance to the centre of the front.
inline double eval_subsolution(const SubsolutionParams& p, int component, const Point& x,
                               double r_min = kDefaultRMin) {
  require_subsolution_params(p, r_min);
  if (component != 1 && component != 2) throw PreconditionError("subsolution component must be 1 or 2");
  const int n = p.n;
  const double xn = x[n - 1] - p.R;
  const double rho = std::sqrt(tangential_norm2(x, n) + xn * xn);
  const double t = p.R - rho;
  const double z = x[n];
  const double base = component == 1 ? kU(t, z) : kUbar(t, z);
  return (1.0 + p.beta / p.R) * base * ((n - 1) * t / p.R + 1.0);
}

/// First-order displacement of the subsolution front relative to U (component
/// 1) or to the mirror profile (component 2).
inline double gamma_R(const SubsolutionParams& p, int component, const Point& x) {
  const int n = p.n;
  const double r = edge_distance(x, n);
  const double quad = -tangential_norm2(x, n) / (2.0 * p.R);
  const double lin = 2.0 * (n - 1) * x[n - 1] * r / p.R + 2.0 * p.beta * r / p.R;
  return component == 1 ? quad + lin : quad - lin;
}

// ---------------------------------------------------------------------------
// Domain variations

struct DomainVariationOptions {
  int scan_cells = 64;
  double tolerance = 1e-10;
};

/// Possibly multi-valued displacement field w(X) with U(X) = g(X - eps w e_n)
/// (or the mirrored profile for Orientation::Minus).
struct DomainVariationField {
  double epsilon = 0.0;
  Orientation orientation = Orientation::Plus;
  std::vector<Point> points;
  std::vector<std::vector<double>> values;  ///< sorted roots per point

  std::size_t size() const { return points.size(); }
  double lower(std::size_t i) const { return values[i].front(); }
  double upper(std::size_t i) const { return values[i].back(); }
  bool multi_valued(std::size_t i) const { return values[i].size() > 1; }
  std::size_t multi_valued_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](const auto& v) { return v.size() > 1; }));
  }
};

/// True when X lies on the zero set of the reference profile (P- for Plus,
/// P+ for Minus), where the variation is undefined.
inline bool on_reference_zero_set(const Point& x, int n, Orientation o) {
  if (x[n] != 0.0) return false;
  return o == Orientation::Plus ? x[n - 1] <= 0.0 : x[n - 1] >= 0.0;
}

/// All roots w in [-1, 1] of ref(X) - g(X - eps w e_n) at a single point,
/// by a sign scan over a uniform partition followed by bisection.
template <class Fn>
std::vector<double> variation_roots(const Fn& g, const Point& x, int n, double epsilon, Orientation o,
                                    const DomainVariationOptions& opt = {}) {
  const HalfPlaneProfile ref{o};
  const double target = ref(x[n - 1], x[n]);
  auto f = [&](double w) {
    Point y = x;
    y[n - 1] -= epsilon * w;
    return target - g(y);
  };
  const int cells = std::max(1, opt.scan_cells);
  std::vector<double> ws(cells + 1), fs(cells + 1);
  for (int k = 0; k <= cells; ++k) {
    ws[k] = -1.0 + 2.0 * k / cells;
    fs[k] = f(ws[k]);
  }
  std::vector<double> roots;
  for (int k = 0; k <= cells; ++k) {
    if (fs[k] == 0.0) {
      roots.push_back(ws[k]);
      continue;
    }
    if (k == cells || fs[k + 1] == 0.0) continue;
    if ((fs[k] < 0.0) != (fs[k + 1] < 0.0)) {
      double a = ws[k], b = ws[k + 1], fa = fs[k];
      while (b - a > opt.tolerance) {
        const double m = 0.5 * (a + b);
        const double fm = f(m);
        if (fm == 0.0) {
          a = b = m;
          break;
        }
        if ((fm < 0.0) == (fa < 0.0)) {
          a = m;
          fa = fm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

/// Domain variation of g at each of `points`. Points on the reference zero
/// set are rejected; a point with no root raises NoRootError.
template <class Fn>
DomainVariationField domain_variation(const Fn& g, const std::vector<Point>& points, int n, double epsilon,
                                      Orientation o, const DomainVariationOptions& opt = {}) {
  if (!(epsilon > 0.0)) throw PreconditionError("domain variation requires epsilon > 0");
  DomainVariationField out;
  out.epsilon = epsilon;
  out.orientation = o;
  out.points = points;
  out.values.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (on_reference_zero_set(points[i], n, o))
      throw PreconditionError("domain variation evaluated on the reference zero set");
    auto roots = variation_roots(g, points[i], n, epsilon, o, opt);
    if (roots.empty()) throw NoRootError("no domain-variation root in [-1,1]; flatness fails", i);
    out.values.push_back(std::move(roots));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expansion check for the subsolution family

struct SubsolutionExpansionReport {
  std::vector<double> radii;
  std::vector<double> sup_deviation;         ///< sup |w - gamma_R|
  std::vector<double> scaled_deviation;      ///< sup |w - gamma_R| * R^2
  double loglog_slope = 0.0;                 ///< least-squares slope of log sup vs log R
  bool bounded = false;                      ///< max/min of scaled deviations within factor 4
};

/// Sample points in the half ball B_radius ∩ {z >= 0} on a lattice of the
/// given spacing, skipping the reference zero set and points too close to it.
inline std::vector<Point> half_ball_samples(int n, double radius, double spacing, Orientation o,
                                            double min_edge_distance = 0.0) {
  std::vector<Point> pts;
  const int m = static_cast<int>(std::floor(radius / spacing));
  std::array<int, kMaxDim> idx{};
  const int dim = n + 1;
  for (int a = 0; a < n; ++a) idx[a] = -m;
  idx[n] = 0;
  while (true) {
    Point p{};
    for (int a = 0; a < dim; ++a) p[a] = idx[a] * spacing;
    if (norm(p, dim) <= radius && !on_reference_zero_set(p, n, o) && edge_distance(p, n) >= min_edge_distance)
      pts.push_back(p);
    int a = dim - 1;
    while (a >= 0) {
      if (++idx[a] <= m) break;
      idx[a] = (a == n) ? 0 : -m;
      --a;
    }
    if (a < 0) break;
  }
  return pts;
}

/// Measures sup |w - gamma_R| over `points` for each radius in `radii`, where
/// w is the domain variation (epsilon = 1) of the subsolution component.
inline SubsolutionExpansionReport check_subsolution_expansion(double beta, int n, int component,
                                                              const std::vector<double>& radii,
                                                              const std::vector<Point>& points,
                                                              double r_min = kDefaultRMin) {
  SubsolutionExpansionReport rep;
  const Orientation o = component == 1 ? Orientation::Plus : Orientation::Minus;
  for (double R : radii) {
    SubsolutionParams p{R, beta, n};
    require_subsolution_params(p, r_min);
    auto g = [&](const Point& y) { return eval_subsolution(p, component, y, r_min); };
    const auto field = domain_variation(g, points, n, 1.0, o);
    double sup = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double gr = gamma_R(p, component, field.points[i]);
      for (double w : field.values[i]) sup = std::max(sup, std::abs(w - gr));
    }
    rep.radii.push_back(R);
    rep.sup_deviation.push_back(sup);
    rep.scaled_deviation.push_back(sup * R * R);
  }
  if (rep.radii.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = static_cast<double>(rep.radii.size());
    for (std::size_t i = 0; i < rep.radii.size(); ++i) {
      const double lx = std::log(rep.radii[i]);
      const double ly = std::log(std::max(rep.sup_deviation[i], std::numeric_limits<double>::min()));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    rep.loglog_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  }
  if (!rep.scaled_deviation.empty()) {
    const auto [lo, hi] = std::minmax_element(rep.scaled_deviation.begin(), rep.scaled_deviation.end());
    rep.bounded = *lo > 0.0 ? (*hi / *lo) <= 4.0 : *hi == 0.0;
  }
  return rep;
}

}  // namespace segfb
