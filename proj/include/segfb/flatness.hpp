#pragma once

// Flatness of two-component configurations against scaled, rotated copies of
// the pair (U, Ubar), oscillation of domain variations on dyadic balls, one
// improvement-of-flatness step, and graph fits of the free boundary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "segfb/errors.hpp"
#include "segfb/grid.hpp"
#include "segfb/interface.hpp"
#include "segfb/profiles.hpp"

namespace segfb {

inline constexpr double kDefaultEpsilonBar = 0.1;

/// Nodes X of the grid with |X - center| <= radius; the centre lies on the trace.
struct FlatnessRegion {
  Point center{};
  double radius = 1.0;
};

struct FlatnessReport {
  double epsilon = 0.0;  ///< smallest width for which both sandwiches hold
  Point direction{};     ///< unit vector in the trace hyperplane
  double amplitude = 1.0;
  double rho = 1.0;  ///< radius of the region
  Point center{};
  std::size_t nodes = 0;
  double epsilon_bar = kDefaultEpsilonBar;
  bool verified = false;  ///< nodewise re-check of the sandwich at epsilon
};

namespace detail {

/// Parameter s with U(s, z) = v for v > 0: s = v^2 - z^2 / (4 v^2).
inline double inverse_profile(double v, double z) { return v * v - z * z / (4.0 * v * v); }

/// Smallest eps with U(t - eps, z) <= v <= U(t + eps, z).
inline double sandwich_width(double v, double t, double z, double theta) {
  if (v > theta) return std::abs(t - inverse_profile(v, z));
  if (z == 0.0) return std::max(t, 0.0);
  return std::numeric_limits<double>::infinity();
}

inline double tangential_coordinate(const Point& x, const Point& center, const Point& nu, int n) {
  double t = 0.0;
  for (int a = 0; a < n; ++a) t += (x[a] - center[a]) * nu[a];
  return t;
}

inline void require_unit_direction(const Point& nu, int n) {
  double s = 0.0;
  for (int a = 0; a < n; ++a) s += nu[a] * nu[a];
  if (std::abs(s - 1.0) > 1e-9) throw PreconditionError("flatness direction must be a unit vector");
  if (nu[n] != 0.0) throw PreconditionError("flatness direction must lie in the trace hyperplane");
}

/// Region nodes, collected once so repeated fits skip the full-grid scan.
struct RegionNodes {
  std::vector<std::size_t> index;
  std::vector<Point> coords;
};

inline RegionNodes region_nodes(const ExtensionGrid& g, const FlatnessRegion& region) {
  RegionNodes out;
  const int dim = g.dim();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.coords(i);
    if (distance(x, region.center, dim) <= region.radius + 1e-12) {
      out.index.push_back(i);
      out.coords.push_back(x);
    }
  }
  return out;
}

}  // namespace detail

namespace detail {

inline FlatnessReport measure_flatness_on(const Configuration& u, const RegionNodes& nodes, const Point& nu,
                                          double amplitude, const FlatnessRegion& region, double epsilon_bar) {
  if (u.k() != 2) throw PreconditionError("flatness needs exactly two components");
  const int n = u.grid().n();
  require_unit_direction(nu, n);
  if (!(amplitude > 0.0)) throw PreconditionError("flatness amplitude must be positive");
  if (!(region.radius > 0.0)) throw PreconditionError("flatness region radius must be positive");
  if (region.center[n] != 0.0) throw PreconditionError("flatness centre must lie on the trace");
  if (nodes.index.empty()) throw PreconditionError("flatness region contains no nodes");
  FlatnessReport rep;
  rep.direction = nu;
  rep.amplitude = amplitude;
  rep.rho = region.radius;
  rep.center = region.center;
  rep.epsilon_bar = epsilon_bar;
  rep.nodes = nodes.index.size();
  const double theta = kSupportThreshold / amplitude;
  double eps = 0.0;
  for (std::size_t k = 0; k < nodes.index.size(); ++k) {
    const std::size_t i = nodes.index[k];
    const Point& x = nodes.coords[k];
    const double t = tangential_coordinate(x, region.center, nu, n);
    eps = std::max(eps, sandwich_width(u[0][i] / amplitude, t, x[n], theta));
    eps = std::max(eps, sandwich_width(u[1][i] / amplitude, -t, x[n], theta));
  }
  if (!(eps <= 2.0 * region.radius)) throw PreconditionError("no finite flatness up to the region width");
  rep.epsilon = eps;

  const double e = eps * (1.0 + 1e-9) + 1e-12;
  const double tol = 1e-9 * amplitude + kSupportThreshold;
  rep.verified = true;
  for (std::size_t k = 0; k < nodes.index.size(); ++k) {
    const std::size_t i = nodes.index[k];
    const Point& x = nodes.coords[k];
    const double t = tangential_coordinate(x, region.center, nu, n);
    const double z = x[n];
    const double a = u[0][i], b = u[1][i];
    if (a < amplitude * kU(t - e, z) - tol || a > amplitude * kU(t + e, z) + tol) rep.verified = false;
    if (b < amplitude * kUbar(t + e, z) - tol || b > amplitude * kUbar(t - e, z) + tol) rep.verified = false;
  }
  return rep;
}

}  // namespace detail

/// Smallest eps with a U(x.nu - eps, z) <= u_1 <= a U(x.nu + eps, z) and
/// a Ubar(x.nu + eps, z) <= u_2 <= a Ubar(x.nu - eps, z) at every region node,
/// x measured from the region centre. Inverts U in closed form per node, then
/// re-checks both sandwiches nodewise.
inline FlatnessReport measure_flatness(const Configuration& u, const Point& nu, double amplitude,
                                       const FlatnessRegion& region, double epsilon_bar = kDefaultEpsilonBar) {
  return detail::measure_flatness_on(u, detail::region_nodes(u.grid(), region), nu, amplitude, region, epsilon_bar);
}

// ---------------------------------------------------------------------------
// Oscillation of domain variations

struct OscillationOptions {
  double scale_factor = 0.5;  ///< ratio of consecutive ball radii (the eta of the decay statement)
  int max_levels = 8;
  double epsilon_bar = kDefaultEpsilonBar;
  double min_radius_cells = 4.0;  ///< smallest ball radius in units of h
};

struct OscillationReport {
  double epsilon = 0.0;
  std::vector<double> radii;
  std::vector<double> a1, b1, a2, b2;  ///< envelopes of both variations per ball
  std::vector<double> osc;             ///< max of b1 - a1 and b2 - a2
  double decay_factor = 0.0;           ///< geometric fit of osc_{m+1} / osc_m
  std::size_t samples = 0;
};

/// Envelopes of the eps-domain variations of u_1 (against U) and u_2 (against
/// Ubar) over balls B_{rho_m}(center), rho_m = radius * eta^m. Levels stop when
/// rho_m < min_radius_cells * h or the admissibility bound
/// 2 eps ((1 - eta)/eta)^m (b_0 - a_0) <= eps_bar fails.
inline OscillationReport harnack_oscillation(const Configuration& u, double epsilon, const Point& center,
                                             double radius, const OscillationOptions& opt = {}) {
  if (u.k() != 2) throw PreconditionError("oscillation needs exactly two components");
  if (!(epsilon > 0.0)) throw PreconditionError("oscillation requires epsilon > 0");
  const auto& g = u.grid();
  const int n = g.n();
  const int dim = g.dim();
  if (center[n] != 0.0) throw PreconditionError("oscillation centre must lie on the trace");
  for (int a = 0; a < n; ++a) {
    const double lo = center[a] - radius - (a == n - 1 ? epsilon : 0.0);
    const double hi = center[a] + radius + (a == n - 1 ? epsilon : 0.0);
    if (lo < g.lower(a) - 1e-12 || hi > g.upper(a) + 1e-12)
      throw PreconditionError("oscillation ball plus shift exceeds the box");
  }
  if (radius > g.zmax() + 1e-12) throw PreconditionError("oscillation ball exceeds the box height");

  // Sample nodes of the outer ball off the zero set of each reference profile,
  // in coordinates relative to the centre.
  std::vector<Point> pts1, pts2;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Point x = g.coords(i);
    if (distance(x, center, dim) > radius + 1e-12) continue;
    for (int a = 0; a < dim; ++a) x[a] -= center[a];
    if (!on_reference_zero_set(x, n, Orientation::Plus)) pts1.push_back(x);
    if (!on_reference_zero_set(x, n, Orientation::Minus)) pts2.push_back(x);
  }
  auto shifted = [&](const ScalarField& f) {
    return [&f, &center, dim](Point y) {
      for (int a = 0; a < dim; ++a) y[a] += center[a];
      return interpolate(f, y);
    };
  };
  const auto f1 = shifted(u[0]);
  const auto f2 = shifted(u[1]);
  const auto v1 = domain_variation(f1, pts1, n, epsilon, Orientation::Plus);
  const auto v2 = domain_variation(f2, pts2, n, epsilon, Orientation::Minus);

  OscillationReport rep;
  rep.epsilon = epsilon;
  rep.samples = pts1.size() + pts2.size();
  const double eta = opt.scale_factor;
  auto envelope = [&](const DomainVariationField& f, double r, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (norm(f.points[i], dim) > r + 1e-12) continue;
      lo = std::min(lo, f.lower(i));
      hi = std::max(hi, f.upper(i));
    }
  };
  double osc0 = 0.0;
  for (int m = 0; m < opt.max_levels; ++m) {
    const double r = radius * std::pow(eta, m);
    if (r < opt.min_radius_cells * g.h()) break;
    double lo1, hi1, lo2, hi2;
    envelope(v1, r, lo1, hi1);
    envelope(v2, r, lo2, hi2);
    if (!(lo1 <= hi1) || !(lo2 <= hi2)) break;
    const double osc = std::max(hi1 - lo1, hi2 - lo2);
    if (m == 0) osc0 = osc;
    if (m > 0 && 2.0 * epsilon * std::pow((1.0 - eta) / eta, m) * osc0 > opt.epsilon_bar) break;
    rep.radii.push_back(r);
    rep.a1.push_back(lo1);
    rep.b1.push_back(hi1);
    rep.a2.push_back(lo2);
    rep.b2.push_back(hi2);
    rep.osc.push_back(osc);
  }
  // Least-squares slope of log osc against the level index, over positive entries.
  double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
  for (std::size_t m = 0; m < rep.osc.size(); ++m) {
    if (!(rep.osc[m] > 1e-14)) continue;
    const double x = static_cast<double>(m), y = std::log(rep.osc[m]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    cnt += 1.0;
  }
  if (cnt >= 2.0) rep.decay_factor = std::exp((cnt * sxy - sx * sy) / (cnt * sxx - sx * sx));
  return rep;
}

// ---------------------------------------------------------------------------
// Improvement of flatness

struct ImprovementOptions {
  double angle_constant = 1.0;  ///< nu ranges over angles up to angle_constant * eps from the input direction
  double resolution = 0.125;    ///< coarse search step as a fraction of eps
  int refine_iterations = 40;
  double epsilon_bar = kDefaultEpsilonBar;
};

struct ImprovementResult {
  double epsilon_in = 0.0;
  double rho = 0.0;
  double epsilon_out = 0.0;       ///< flatness on B_rho in the original units
  double epsilon_rescaled = 0.0;  ///< epsilon_out / rho
  double epsilon_identity = 0.0;  ///< flatness on B_rho with the input direction and unit amplitude
  Point nu_out{};
  double alpha_out = 1.0;
  int evaluations = 0;
};

namespace detail {

/// Unit direction obtained by rotating e_n by the given angles (one per
/// tangential axis) towards e_1, ..., e_{n-1}.
inline Point tilted_direction(const std::vector<double>& angles, int n) {
  Point nu{};
  nu[n - 1] = 1.0;
  for (int a = 0; a + 1 < n; ++a) nu[a] = std::tan(angles[a]);
  const double s = norm(nu, n);
  for (int a = 0; a < n; ++a) nu[a] /= s;
  return nu;
}

}  // namespace detail

/// Searches amplitude alpha with |alpha - 1| <= eps and directions within
/// angle C eps of e_n for the flattest fit on B_rho(center). Coarse grid of
/// step resolution * eps over all parameters, then coordinate-wise golden
/// refinement around the best node. The identity fit is always a candidate.
inline ImprovementResult improvement_check(const Configuration& u, double epsilon, double rho, const Point& center,
                                           const ImprovementOptions& opt = {}) {
  if (!(epsilon > 0.0)) throw PreconditionError("improvement check requires epsilon > 0");
  if (epsilon > opt.epsilon_bar) throw PreconditionError("epsilon exceeds the flatness threshold eps_bar");
  if (!(rho > 0.0 && rho <= 1.0)) throw PreconditionError("rho must lie in (0, 1]");
  const int n = u.grid().n();
  const int params = n;  // amplitude plus n - 1 angles
  const FlatnessRegion region{center, rho};
  const auto nodes = detail::region_nodes(u.grid(), region);
  ImprovementResult res;
  res.epsilon_in = epsilon;
  res.rho = rho;

  auto evaluate = [&](const std::vector<double>& p) {
    ++res.evaluations;
    const std::vector<double> angles(p.begin() + 1, p.end());
    try {
      return detail::measure_flatness_on(u, nodes, detail::tilted_direction(angles, n), p[0], region, opt.epsilon_bar)
          .epsilon;
    } catch (const PreconditionError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  std::vector<double> lo(params), hi(params);
  lo[0] = 1.0 - epsilon;
  hi[0] = 1.0 + epsilon;
  for (int a = 1; a < params; ++a) {
    lo[a] = -opt.angle_constant * epsilon;
    hi[a] = opt.angle_constant * epsilon;
  }

  std::vector<double> best(params, 0.0);
  best[0] = 1.0;
  double best_val = evaluate(best);
  res.epsilon_identity = best_val;

  // Coarse grid. Ties keep the lexicographically first candidate.
  const double step = std::max(opt.resolution * epsilon, 1e-12);
  std::vector<int> counts(params);
  for (int a = 0; a < params; ++a) counts[a] = static_cast<int>(std::floor((hi[a] - lo[a]) / step + 1e-9)) + 1;
  std::vector<int> idx(params, 0);
  while (true) {
    std::vector<double> p(params);
    for (int a = 0; a < params; ++a) p[a] = lo[a] + idx[a] * step;
    const double v = evaluate(p);
    if (v < best_val) {
      best_val = v;
      best = p;
    }
    int a = 0;
    while (a < params && ++idx[a] == counts[a]) idx[a++] = 0;
    if (a == params) break;
  }

  // Coordinate-wise golden-section refinement within one coarse step.
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (int a = 0; a < params; ++a) {
      double l = std::max(lo[a], best[a] - step), r = std::min(hi[a], best[a] + step);
      auto at = [&](double x) {
        auto p = best;
        p[a] = x;
        return evaluate(p);
      };
      double x1 = r - phi * (r - l), x2 = l + phi * (r - l);
      double f1 = at(x1), f2 = at(x2);
      for (int it = 0; it < opt.refine_iterations && r - l > 1e-12; ++it) {
        if (f1 <= f2) {
          r = x2;
          x2 = x1;
          f2 = f1;
          x1 = r - phi * (r - l);
          f1 = at(x1);
        } else {
          l = x1;
          x1 = x2;
          f1 = f2;
          x2 = l + phi * (r - l);
          f2 = at(x2);
        }
      }
      const double x = f1 <= f2 ? x1 : x2;
      const double v = std::min(f1, f2);
      if (v < best_val) {
        best_val = v;
        best[a] = x;
      }
    }
  }
  if (!std::isfinite(best_val)) throw ConvergenceError("improvement search found no admissible fit");
  res.epsilon_out = best_val;
  res.epsilon_rescaled = best_val / rho;
  res.alpha_out = best[0];
  res.nu_out = detail::tilted_direction(std::vector<double>(best.begin() + 1, best.end()), n);
  return res;
}

// ---------------------------------------------------------------------------
// Graph fit of the free boundary

struct GraphFit {
  int n = 2;
  Point center{};
  double radius = 0.0;
  /// x_n - c_n = c0 + g . (x' - c') + (x' - c')^T Q (x' - c'), Q symmetric.
  double c0 = 0.0;
  std::vector<double> gradient;             ///< n - 1 entries
  std::vector<std::vector<double>> hessian;  ///< 2 Q, (n-1) x (n-1)
  double sup_gradient = 0.0;                 ///< sup |grad gamma| over the window points
  double holder_proxy = 0.0;                 ///< max |grad gamma(x) - grad gamma(y)| / |x - y|^alpha
  double residual = 0.0;                     ///< sup |x_n - gamma(x')| over the window points
  std::size_t points = 0;
};

/// Quadratic least-squares graph x_n = gamma(x') through the interface points
/// with |x' - c'| <= radius. Each x'-column (cells of side h) must carry a
/// single crossing, i.e. its points span at most 2h in x_n.
inline GraphFit fit_interface_graph(const InterfacePointSet& fb, const Point& center, double radius,
                                    double alpha = 0.5) {
  const int n = fb.n;
  if (n < 2) throw PreconditionError("graph fit needs a trace of dimension at least 2");
  const int d = n - 1;
  std::vector<Point> window;
  for (const auto& p : fb.points) {
    double s = 0.0;
    for (int a = 0; a < d; ++a) s += (p[a] - center[a]) * (p[a] - center[a]);
    if (std::sqrt(s) <= radius + 1e-12) window.push_back(p);
  }
  const int terms = 1 + d + d * (d + 1) / 2;
  if (static_cast<int>(window.size()) < 2 * terms) throw PreconditionError("too few interface points in the window");

  std::map<std::vector<long>, std::pair<double, double>> columns;
  for (const auto& p : window) {
    std::vector<long> key(d);
    for (int a = 0; a < d; ++a) key[a] = std::lround((p[a] - center[a]) / fb.h);
    auto [it, fresh] = columns.try_emplace(key, p[n - 1], p[n - 1]);
    if (!fresh) {
      it->second.first = std::min(it->second.first, p[n - 1]);
      it->second.second = std::max(it->second.second, p[n - 1]);
    }
  }
  for (const auto& [key, span] : columns)
    if (span.second - span.first > 2.0 * fb.h + 1e-12) throw PreconditionError("interface is not a graph over x' in the window");

  Eigen::MatrixXd A(window.size(), terms);
  Eigen::VectorXd b(window.size());
  for (std::size_t i = 0; i < window.size(); ++i) {
    const auto& p = window[i];
    int c = 0;
    A(i, c++) = 1.0;
    for (int a = 0; a < d; ++a) A(i, c++) = p[a] - center[a];
    for (int a = 0; a < d; ++a)
      for (int e = a; e < d; ++e) A(i, c++) = (p[a] - center[a]) * (p[e] - center[e]);
    b[i] = p[n - 1] - center[n - 1];
  }
  const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);

  GraphFit fit;
  fit.n = n;
  fit.center = center;
  fit.radius = radius;
  fit.points = window.size();
  fit.c0 = coef[0];
  fit.gradient.assign(coef.data() + 1, coef.data() + 1 + d);
  fit.hessian.assign(d, std::vector<double>(d, 0.0));
  {
    int c = 1 + d;
    for (int a = 0; a < d; ++a)
      for (int e = a; e < d; ++e) {
        const double q = coef[c++];
        if (a == e) {
          fit.hessian[a][a] = 2.0 * q;
        } else {
          fit.hessian[a][e] = q;
          fit.hessian[e][a] = q;
        }
      }
  }
  fit.residual = (A * coef - b).cwiseAbs().maxCoeff();
  auto grad_at = [&](const Point& p) {
    std::vector<double> gr(fit.gradient);
    for (int a = 0; a < d; ++a)
      for (int e = 0; e < d; ++e) gr[a] += fit.hessian[a][e] * (p[e] - center[e]);
    return gr;
  };
  std::vector<std::vector<double>> grads;
  grads.reserve(window.size());
  for (const auto& p : window) {
    grads.push_back(grad_at(p));
    double s = 0.0;
    for (double v : grads.back()) s += v * v;
    fit.sup_gradient = std::max(fit.sup_gradient, std::sqrt(s));
  }
  for (std::size_t i = 0; i < window.size(); ++i)
    for (std::size_t j = i + 1; j < window.size(); ++j) {
      double dx = 0.0, dg = 0.0;
      for (int a = 0; a < d; ++a) {
        dx += (window[i][a] - window[j][a]) * (window[i][a] - window[j][a]);
        dg += (grads[i][a] - grads[j][a]) * (grads[i][a] - grads[j][a]);
      }
      if (dx <= 0.0) continue;
      fit.holder_proxy = std::max(fit.holder_proxy, std::sqrt(dg) / std::pow(std::sqrt(dx), alpha));
    }
  return fit;
}

}  // namespace segfb
