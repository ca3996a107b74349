#pragma once

// Almgren-type quantities E, H, N = E/H about trace points, and the identities
// they satisfy for homogeneous configurations.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "segfb/errors.hpp"
#include "segfb/grid.hpp"

namespace segfb {

inline constexpr double kMinHeight = 1e-14;

namespace detail {

inline void require_radius(const ExtensionGrid& g, const Point& x0, double r) {
  if (!(r >= 4.0 * g.h() - 1e-12)) throw PreconditionError("radius below 4h");
  if (x0[g.n()] != 0.0) throw PreconditionError("centre must lie on the trace");
  if (!g.contains_ball(x0, r)) throw PreconditionError("ball exceeds the box");
}

}  // namespace detail

inline double gradient_integral_at_span(const Configuration& u, const Point& x0, double r, int span) {
  return quad_ball_cells(
      u.grid(),
      [&](const MultiIndex& m, const Point&) {
        double s = 0.0;
        const int dim = u.grid().dim();
        for (const auto& f : u.components) {
          const auto grad = cell_gradient(f, m, span);
          for (int a = 0; a < dim; ++a) s += grad[a] * grad[a];
        }
        return s;
      },
      x0, r, span);
}

/// True when every other node forms a grid of the same box with L on it.
inline bool supports_coarse_level(const ExtensionGrid& g) {
  for (int a = 0; a <= g.n(); ++a)
    if ((g.count(a) - 1) % 2 != 0) return false;
  return g.edge_index() % 2 == 0;
}

/// Ball integral of sum |grad u_i|^2. The midpoint rule on cells of side h
/// carries an O(h/r) bias from the r^{-1} energy density at L; it is removed
/// by extrapolating against the same rule on cells of side 2h (same samples).
inline double dirichlet_integral(const Configuration& u, const Point& x0, double r) {
  const double fine = gradient_integral_at_span(u, x0, r, 1);
  if (!supports_coarse_level(u.grid())) return fine;
  return 2.0 * fine - gradient_integral_at_span(u, x0, r, 2);
}

/// E(r) = r^{1-n} * integral over B_r(x0) of sum |grad u_i|^2.
inline double energy_E(const Configuration& u, const Point& x0, double r) {
  const auto& g = u.grid();
  detail::require_radius(g, x0, r);
  return std::pow(r, 1 - g.n()) * dirichlet_integral(u, x0, r);
}

/// H(r) = r^{-n} * integral over the sphere of sum u_i^2.
inline double height_H(const Configuration& u, const Point& x0, double r, int n_ang = kDefaultAngularSamples) {
  const auto& g = u.grid();
  detail::require_radius(g, x0, r);
  const double integral = quad_sphere(
      g,
      [&](const Point& p, const Point&) {
        double s = 0.0;
        for (const auto& f : u.components) {
          const double v = interpolate(f, p);
          s += v * v;
        }
        return s;
      },
      x0, r, n_ang);
  return integral / std::pow(r, g.n());
}

struct FrequencyReport {
  Point center{};
  std::vector<double> radii, E, H, N;
  double N_zero_plus = 0.0;
  double monotonicity_defect = 0.0;
};

/// Least-squares line through (x_j, y_j) evaluated at x = 0.
inline double linear_intercept(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  if (m == 1) return y[0];
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < m; ++j) {
    sx += x[j];
    sy += y[j];
    sxx += x[j] * x[j];
    sxy += x[j] * y[j];
  }
  const double det = m * sxx - sx * sx;
  if (std::abs(det) < 1e-300) return sy / m;
  const double slope = (m * sxy - sx * sy) / det;
  return (sy - slope * sx) / m;
}

inline FrequencyReport frequency_N(const Configuration& u, const Point& x0, std::vector<double> radii,
                                   int n_ang = kDefaultAngularSamples) {
  if (radii.empty()) throw PreconditionError("no radii given");
  std::sort(radii.begin(), radii.end());
  FrequencyReport rep;
  rep.center = x0;
  rep.radii = radii;
  for (double r : radii) {
    const double e = energy_E(u, x0, r);
    const double hh = height_H(u, x0, r, n_ang);
    if (!(hh >= kMinHeight)) throw PreconditionError("H vanishes at r = " + std::to_string(r));
    rep.E.push_back(e);
    rep.H.push_back(hh);
    rep.N.push_back(e / hh);
  }
  for (std::size_t j = 0; j + 1 < rep.N.size(); ++j)
    rep.monotonicity_defect = std::max(rep.monotonicity_defect, rep.N[j] - rep.N[j + 1]);
  const std::size_t use = std::min<std::size_t>(3, radii.size());
  rep.N_zero_plus = linear_intercept(std::vector<double>(radii.begin(), radii.begin() + use),
                                     std::vector<double>(rep.N.begin(), rep.N.begin() + use));
  return rep;
}

/// Max relative defect between d/dr log H and 2N/r at interior radii. The
/// derivative is a centred difference in log r, divided by r, which is exact
/// for pure powers of r even on coarse radius lists.
inline double check_logderivative(const FrequencyReport& rep) {
  if (rep.radii.size() < 3) throw PreconditionError("log-derivative check needs at least three radii");
  double worst = 0.0;
  for (std::size_t j = 1; j + 1 < rep.radii.size(); ++j) {
    const double lhs = (std::log(rep.H[j + 1]) - std::log(rep.H[j - 1])) /
                      (std::log(rep.radii[j + 1]) - std::log(rep.radii[j - 1])) / rep.radii[j];
    const double rhs = 2.0 * rep.N[j] / rep.radii[j];
    const double scale = std::max(std::abs(rhs), std::abs(lhs));
    if (scale < 1e-12) continue;
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-12));
  }
  return worst;
}

struct PohozaevReport {
  double residual = 0.0;
  bool degenerate = false;
  double volume = 0.0;        ///< integral over B_r of sum |grad u|^2
  double surface = 0.0;       ///< integral over dB_r of sum |grad u|^2
  double surface_normal = 0.0;  ///< integral over dB_r of sum (d_nu u)^2
};

namespace detail {

/// Sphere integrals of sum |grad u|^2 and sum (d_nu u)^2 using interpolated
/// nodal centred differences.
inline std::array<double, 2> sphere_gradient_integrals(const Configuration& u, const Point& x0, double r, int n_ang) {
  const auto& g = u.grid();
  const int dim = g.dim();
  std::vector<std::vector<ScalarField>> grads;
  for (const auto& f : u.components) grads.push_back(nodal_gradient(f));
  const double full = quad_sphere(
      g,
      [&](const Point& p, const Point&) {
        double s = 0.0;
        for (const auto& gr : grads)
          for (int a = 0; a < dim; ++a) {
            const double d = interpolate(gr[a], p);
            s += d * d;
          }
        return s;
      },
      x0, r, n_ang);
  const double normal = quad_sphere(
      g,
      [&](const Point& p, const Point& nu) {
        double s = 0.0;
        for (const auto& gr : grads) {
          double d = 0.0;
          for (int a = 0; a < dim; ++a) d += nu[a] * interpolate(gr[a], p);
          s += d * d;
        }
        return s;
      },
      x0, r, n_ang);
  return {full, normal};
}

}  // namespace detail

/// |(1-n) V + r S - 2 r S_nu| / (r S). The sphere terms are extrapolated from
/// the grid and its every-other-node coarsening, like the volume term.
inline PohozaevReport pohozaev_residual(const Configuration& u, const Point& x0, double r,
                                        int n_ang = kDefaultAngularSamples) {
  const auto& g = u.grid();
  detail::require_radius(g, x0, r);
  const int n = g.n();
  PohozaevReport rep;
  rep.volume = dirichlet_integral(u, x0, r);
  auto sphere = detail::sphere_gradient_integrals(u, x0, r, n_ang);
  if (supports_coarse_level(g)) {
    const auto coarse = detail::sphere_gradient_integrals(coarsen(u), x0, r, n_ang);
    for (int j = 0; j < 2; ++j) sphere[j] = 2.0 * sphere[j] - coarse[j];
  }
  rep.surface = sphere[0];
  rep.surface_normal = sphere[1];
  const double denom = r * rep.surface;
  const double num = (1.0 - n) * rep.volume + r * rep.surface - 2.0 * r * rep.surface_normal;
  if (std::abs(denom) < 1e-14) {
    rep.degenerate = true;
    rep.residual = 0.0;
  } else {
    rep.residual = std::abs(num) / std::abs(denom);
  }
  return rep;
}

struct DoublingReport {
  double lhs = 0.0;       ///< H(r2)
  double rhs = 0.0;       ///< H(r1) (r2/r1)^{2 max N}
  double exponent = 0.0;  ///< 2 max N over [r1, r2]
  double ratio = 0.0;     ///< H(r2) / H(r1)
  bool holds = false;     ///< lhs <= rhs (1 + tolerance)
};

inline DoublingReport doubling_check(const Configuration& u, const Point& x0, double r1, double r2,
                                     double tolerance = 0.03, int samples = 5) {
  if (!(r1 < r2)) throw PreconditionError("doubling check needs r1 < r2");
  std::vector<double> radii;
  for (int j = 0; j < samples; ++j) radii.push_back(r1 + (r2 - r1) * j / (samples - 1));
  const auto rep = frequency_N(u, x0, radii);
  DoublingReport d;
  d.exponent = 2.0 * std::max(0.0, *std::max_element(rep.N.begin(), rep.N.end()));
  d.lhs = rep.H.back();
  d.rhs = rep.H.front() * std::pow(r2 / r1, d.exponent);
  d.ratio = d.lhs / rep.H.front();
  d.holds = d.lhs <= d.rhs * (1.0 + tolerance);
  return d;
}

}  // namespace segfb
