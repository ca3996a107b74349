#pragma once

// Blow-up rescaling, fitting of half-plane profile pairs, classification of
// nodal points by their frequency limit, and the reflection-law flux.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "segfb/almgren.hpp"
#include "segfb/errors.hpp"
#include "segfb/grid.hpp"
#include "segfb/interface.hpp"
#include "segfb/profiles.hpp"

namespace segfb {

/// v(X) = u(x0 + t X) / sqrt(H(x0, t)) sampled on [-1, 1]^n x [0, 1] with
/// spacing `h_out` (the input spacing when 0).
inline Configuration rescale(const Configuration& u, const Point& x0, double t, double h_out = 0.0) {
  const auto& g = u.grid();
  const int n = g.n();
  if (!(t > 0.0)) throw PreconditionError("rescaling factor must be positive");
  if (x0[n] != 0.0) throw PreconditionError("blow-up centre must lie on the trace");
  for (int a = 0; a < n; ++a)
    if (x0[a] - t < g.lower(a) - 1e-12 || x0[a] + t > g.upper(a) + 1e-12)
      throw PreconditionError("rescaled window exceeds the box");
  if (t > g.zmax() + 1e-12) throw PreconditionError("rescaled window exceeds the box");
  const double hh = height_H(u, x0, t);
  if (!(hh >= kMinHeight)) throw PreconditionError("degenerate H at the blow-up scale");
  const double scale = 1.0 / std::sqrt(hh);
  const auto out_grid = ExtensionGrid::box(n, 1.0, 1.0, h_out > 0.0 ? h_out : g.h());
  std::vector<ScalarField> comps;
  for (const auto& f : u.components) {
    comps.push_back(sample(out_grid, [&](const Point& X) {
      Point p{};
      for (int a = 0; a <= n; ++a) p[a] = x0[a] + t * X[a];
      return scale * interpolate(f, p);
    }));
  }
  Configuration v = make_configuration(std::move(comps), u.mode);
  v.beta = u.beta;
  return v;
}

struct HomogeneousFit {
  double amplitude = 0.0;
  Point direction{};  ///< unit vector in the trace hyperplane
  double degree = 0.0;
  double residual = 0.0;  ///< sup-norm misfit on the unit ball
  bool converged = true;
};

struct FitOptions {
  int coarse_directions = 72;      ///< per angular parameter
  int max_samples = 150000;        ///< nodes used during the search
  double tolerance = 1e-10;        ///< golden-section tolerance (amplitude and angle)
  std::vector<double> degree_radii{0.5, 0.75, 1.0};
};

namespace detail {

inline constexpr double kInvPhi = 0.6180339887498949;

template <class F>
double golden_minimize(const F& f, double lo, double hi, double tol, double* best_value = nullptr) {
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  if (best_value) *best_value = f(x);
  return x;
}

/// Unit trace direction from n-1 angles (polar then azimuthal).
inline Point direction_from_angles(int n, const std::array<double, 2>& ang) {
  Point nu{};
  if (n == 1) {
    nu[0] = std::cos(ang[0]) >= 0 ? 1.0 : -1.0;
  } else if (n == 2) {
    nu[0] = std::cos(ang[0]);
    nu[1] = std::sin(ang[0]);
  } else {
    nu[0] = std::sin(ang[1]) * std::cos(ang[0]);
    nu[1] = std::sin(ang[1]) * std::sin(ang[0]);
    nu[2] = std::cos(ang[1]);
  }
  return nu;
}

struct FitSamples {
  std::vector<Point> x;
  std::vector<double> v1, v2;
};

inline FitSamples unit_ball_samples(const Configuration& v, int stride) {
  const auto& g = v.grid();
  const int dim = g.dim();
  FitSamples s;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi_index(i);
    bool take = true;
    for (int a = 0; a < dim; ++a)
      if (m[a] % stride != 0) take = false;
    if (!take) continue;
    const Point p = g.coords(m);
    if (norm(p, dim) > 1.0 + 1e-12) continue;
    s.x.push_back(p);
    s.v1.push_back(v[0][i]);
    s.v2.push_back(v[1][i]);
  }
  return s;
}

/// min over a of the sup misfit for a fixed direction; returns {a, misfit}.
inline std::pair<double, double> fit_amplitude(const FitSamples& s, int n, const Point& nu, double tol) {
  const std::size_t m = s.x.size();
  std::vector<double> p1(m), p2(m);
  double pmax = 0.0, vmax = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    p1[k] = eval_pair_component(kU, s.x[k], n, nu);
    p2[k] = eval_pair_component(kUbar, s.x[k], n, nu);
    pmax = std::max({pmax, p1[k], p2[k]});
    vmax = std::max({vmax, std::abs(s.v1[k]), std::abs(s.v2[k])});
  }
  auto misfit = [&](double a) {
    double worst = 0.0;
    for (std::size_t k = 0; k < m; ++k)
      worst = std::max({worst, std::abs(s.v1[k] - a * p1[k]), std::abs(s.v2[k] - a * p2[k])});
    return worst;
  };
  const double hi = pmax > 0.0 ? 4.0 * vmax / pmax + 1.0 : 1.0;
  double best = 0.0;
  const double a = golden_minimize(misfit, 0.0, hi, tol, &best);
  return {a, best};
}

inline double log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t m = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double lx = std::log(x[j]), ly = std::log(y[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace detail

/// Degree from the slope of log H against log r (H ~ r^{2 degree}).
inline double estimate_degree(const Configuration& v, const Point& x0, const std::vector<double>& radii) {
  if (radii.size() < 2) throw PreconditionError("degree estimate needs at least two radii");
  std::vector<double> hs;
  for (double r : radii) hs.push_back(height_H(v, x0, r));
  return 0.5 * detail::log_slope(radii, hs);
}

/// Best (a U(x.nu, z), a Ubar(x.nu, z)) in the sup norm over the unit ball.
inline HomogeneousFit fit_half_plane_pair(const Configuration& v, const FitOptions& opt = {}) {
  if (v.k() != 2) throw PreconditionError("half-plane fit needs exactly two components");
  const auto& g = v.grid();
  const int n = g.n();
  const int dim = g.dim();
  for (int a = 0; a < n; ++a)
    if (g.lower(a) > -1.0 + 1e-12 || g.upper(a) < 1.0 - 1e-12) throw PreconditionError("fit needs the unit ball in the box");
  if (g.zmax() < 1.0 - 1e-12) throw PreconditionError("fit needs the unit ball in the box");

  double ball_nodes = std::pow(2.0 / g.h(), dim) * 0.5;
  int stride = 1;
  while (ball_nodes / std::pow(stride, dim) > opt.max_samples) ++stride;
  const auto search = detail::unit_ball_samples(v, stride);

  HomogeneousFit fit;
  std::array<double, 2> best_ang{0.0, 0.5 * std::numbers::pi};
  double best = std::numeric_limits<double>::infinity();
  const int m = opt.coarse_directions;
  auto evaluate = [&](const std::array<double, 2>& ang) {
    return detail::fit_amplitude(search, n, detail::direction_from_angles(n, ang), opt.tolerance).second;
  };
  if (n == 1) {
    for (double a0 : {0.0, std::numbers::pi}) {
      const double f = evaluate({a0, 0.0});
      if (f < best) {
        best = f;
        best_ang = {a0, 0.0};
      }
    }
  } else if (n == 2) {
    for (int k = 0; k < m; ++k) {
      const std::array<double, 2> ang{2.0 * std::numbers::pi * k / m, 0.0};
      const double f = evaluate(ang);
      if (f < best) {
        best = f;
        best_ang = ang;
      }
    }
    const double step = 2.0 * std::numbers::pi / m;
    double refined = 0.0;
    const double a0 = detail::golden_minimize(
        [&](double t) { return evaluate({t, 0.0}); }, best_ang[0] - step, best_ang[0] + step, opt.tolerance, &refined);
    if (refined <= best) {
      best = refined;
      best_ang[0] = a0;
    } else {
      fit.converged = false;
    }
  } else {
    const int mp = std::max(4, m / 2);
    for (int k = 0; k < m; ++k)
      for (int j = 0; j <= mp; ++j) {
        const std::array<double, 2> ang{2.0 * std::numbers::pi * k / m, std::numbers::pi * j / mp};
        const double f = evaluate(ang);
        if (f < best) {
          best = f;
          best_ang = ang;
        }
      }
    double step0 = 2.0 * std::numbers::pi / m, step1 = std::numbers::pi / mp;
    for (int sweep = 0; sweep < 4; ++sweep) {
      double r0 = 0.0, r1 = 0.0;
      const double t0 = detail::golden_minimize([&](double t) { return evaluate({t, best_ang[1]}); },
                                                best_ang[0] - step0, best_ang[0] + step0, opt.tolerance, &r0);
      if (r0 <= best) {
        best = r0;
        best_ang[0] = t0;
      }
      const double t1 = detail::golden_minimize([&](double t) { return evaluate({best_ang[0], t}); },
                                                best_ang[1] - step1, best_ang[1] + step1, opt.tolerance, &r1);
      if (r1 <= best) {
        best = r1;
        best_ang[1] = t1;
      }
      step0 *= 0.5;
      step1 *= 0.5;
    }
  }
  fit.direction = detail::direction_from_angles(n, best_ang);
  const auto full = detail::unit_ball_samples(v, 1);
  const auto [a, res] = detail::fit_amplitude(full, n, fit.direction, opt.tolerance);
  fit.amplitude = a;
  fit.residual = res;
  if (!(a > 0.0)) fit.converged = false;
  fit.degree = estimate_degree(v, Point{}, opt.degree_radii);
  return fit;
}

enum class NodalLabel { Regular, Singular };

inline const char* to_string(NodalLabel l) { return l == NodalLabel::Regular ? "Regular" : "Singular"; }

struct NodalClassification {
  std::vector<Point> points;
  std::vector<double> estimates;  ///< N(x, 0+)
  std::vector<NodalLabel> labels;
  double delta = 0.1;
};

inline constexpr double kDefaultSingularDelta = 0.1;

/// Radii 4h, 6h, 8h: the three smallest used for the N(0+) extrapolation.
inline std::vector<double> default_classification_radii(const ExtensionGrid& g) {
  return {4.0 * g.h(), 6.0 * g.h(), 8.0 * g.h()};
}

/// Labels each candidate Regular when N(x, 0+) < 1/2 + delta. Candidates must
/// lie on the nodal set: within 1.5 h of the extracted free boundary for two
/// components, or at a trace node where every component vanishes otherwise.
inline NodalClassification classify_nodal_points(const Configuration& u, const std::vector<Point>& candidates,
                                                 double delta = kDefaultSingularDelta,
                                                 std::vector<double> radii = {}) {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  const auto& g = u.grid();
  const int n = g.n();
  if (radii.empty()) radii = default_classification_radii(g);
  std::optional<InterfacePointSet> fb;
  if (u.k() == 2) fb = extract_free_boundary(u);
  NodalClassification out;
  out.delta = delta;
  for (const auto& x : candidates) {
    if (x[n] != 0.0) throw PreconditionError("candidate off the trace");
    bool nodal;
    if (fb) {
      nodal = distance_to_interface(*fb, x) <= 1.5 * g.h();
    } else {
      const std::size_t i = g.index(g.nearest(x));
      nodal = std::all_of(u.components.begin(), u.components.end(),
                          [&](const ScalarField& f) { return f[i] <= kSupportThreshold; });
    }
    if (!nodal) throw PreconditionError("candidate is not on the nodal set");
    const auto rep = frequency_N(u, x, radii);
    out.points.push_back(x);
    out.estimates.push_back(rep.N_zero_plus);
    out.labels.push_back(rep.N_zero_plus < 0.5 + delta ? NodalLabel::Regular : NodalLabel::Singular);
  }
  return out;
}

struct ReflectionOptions {
  int angular_samples = 512;  ///< over the full circle
  Point center{};             ///< centre of Q_l in x' (other entries ignored)
};

/// Lateral flux over Q_l x dB_r, with Q_l the cube of half-edge l in x' and
/// B_r the disc of radius r about L in the (x_n, z) plane:
///   integral of sum_i (d_n u_i)(nu . grad u_i) - 1/2 nu_n |grad u_i|^2.
inline double reflection_defect(const Configuration& u, double l, double r, const ReflectionOptions& opt = {}) {
  const auto& g = u.grid();
  const int n = g.n();
  const int dim = g.dim();
  if (!(r > 0.0) || (n > 1 && !(l > 0.0))) throw PreconditionError("cylinder sizes must be positive");
  for (int a = 0; a + 1 < n; ++a)
    if (opt.center[a] - l < g.lower(a) - 1e-12 || opt.center[a] + l > g.upper(a) + 1e-12)
      throw PreconditionError("cylinder exceeds the box");
  if (-r < g.lower(n - 1) - 1e-12 || r > g.upper(n - 1) + 1e-12 || r > g.zmax() + 1e-12)
    throw PreconditionError("cylinder exceeds the box");

  std::vector<std::vector<ScalarField>> grads;
  for (const auto& f : u.components) grads.push_back(nodal_gradient(f));

  // Midpoint rule on Q_l with cells of size h, upper half circle doubled.
  const int cells = n > 1 ? std::max(1, static_cast<int>(std::lround(2.0 * l / g.h()))) : 1;
  int tangential = 1;
  for (int a = 0; a + 1 < n; ++a) tangential *= cells;
  const int half = std::max(2, opt.angular_samples / 2);
  const double dth = std::numbers::pi / half;
  double total = 0.0;
  for (int q = 0; q < tangential; ++q) {
    Point p{};
    int rest = q;
    for (int a = 0; a + 1 < n; ++a) {
      const int c = rest % cells;
      rest /= cells;
      p[a] = opt.center[a] - l + (c + 0.5) * 2.0 * l / cells;
    }
    for (int k = 0; k < half; ++k) {
      const double th = (k + 0.5) * dth;
      const double cn = std::cos(th), cz = std::sin(th);
      p[n - 1] = r * cn;
      p[n] = r * cz;
      double f = 0.0;
      for (const auto& gr : grads) {
        double grad2 = 0.0;
        std::array<double, kMaxDim> d{};
        for (int a = 0; a < dim; ++a) {
          d[a] = interpolate(gr[a], p);
          grad2 += d[a] * d[a];
        }
        const double dnu = cn * d[n - 1] + cz * d[n];
        f += d[n - 1] * dnu - 0.5 * cn * grad2;
      }
      total += f;
    }
  }
  double cube = 1.0;
  for (int a = 0; a + 1 < n; ++a) cube *= 2.0 * l;
  return 2.0 * total * dth * r * cube / tangential;
}

}  // namespace segfb
