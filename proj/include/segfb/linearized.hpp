#pragma once

// Degenerate weighted problem for (g_1, g_2): minimise
//   integral of U_n^2 |grad g_1|^2 + Ubar_n^2 |grad g_2|^2
// with g_1 = g_2 on L, and read off the expansion
//   g_i = a_0 + a'.(x' - x_0') + b_i r + O(|x' - x_0'|^2 + r^{3/2}).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "segfb/errors.hpp"
#include "segfb/grid.hpp"
#include "segfb/profiles.hpp"
#include "segfb/solver.hpp"

namespace segfb {

struct LinearizedConfig {
  double tolerance = 1e-12;  ///< relative energy decrease per sweep
  int max_sweeps = 200000;
  double relaxation = 0.0;   ///< <= 0: automatic SOR factor
  double weight_cap = 0.0;   ///< <= 0: 1/h
};

struct LinearizedPair {
  ScalarField g1, g2;
  double energy = 0.0;
  int sweeps = 0;
  bool converged = false;
  std::vector<double> energy_history;

  const ExtensionGrid& grid() const { return g1.grid; }
};

/// U_n^2 = U^2 / (4 r^2) and Ubar_n^2 at a point, capped.
inline std::array<double, 2> linearized_weights(const Point& x, int n, double cap) {
  const double t = x[n - 1], z = x[n];
  const double r2 = t * t + z * z;
  if (r2 == 0.0) return {cap, cap};
  const double u = kU(t, z), ub = kUbar(t, z);
  return {std::min(cap, u * u / (4.0 * r2)), std::min(cap, ub * ub / (4.0 * r2))};
}

namespace detail {

/// Per stored edge (node, axis) the weights of both components: the sum of
/// the adjacent stored cell weights divided by 2^{dim-1}, so trace edges get
/// half of an interior edge's share.
struct EdgeWeights {
  std::vector<std::array<double, kMaxDim>> w1, w2;  // indexed by lower node
};

inline EdgeWeights edge_weights(const ExtensionGrid& g, double cap) {
  const int dim = g.dim();
  const int n = g.n();
  EdgeWeights ew;
  ew.w1.assign(g.size(), {});
  ew.w2.assign(g.size(), {});
  const double share = 1.0 / (1 << (dim - 1));
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    for (int a = 0; a < dim; ++a)
      if (m[a] + 1 >= g.count(a)) return;
    Point c = g.coords(m);
    for (int a = 0; a < dim; ++a) c[a] += 0.5 * g.h();
    const auto w = linearized_weights(c, n, cap);
    // Cell with lowest corner m touches 2^{dim-1} edges along each axis.
    const int others = 1 << (dim - 1);
    for (int a = 0; a < dim; ++a) {
      for (int s = 0; s < others; ++s) {
        std::size_t idx = i;
        int bit = 0;
        for (int b = 0; b < dim; ++b) {
          if (b == a) continue;
          if (s & (1 << bit)) idx += g.stride(b);
          ++bit;
        }
        ew.w1[idx][a] += share * w[0];
        ew.w2[idx][a] += share * w[1];
      }
    }
  });
  return ew;
}

inline double weighted_energy(const ScalarField& f, const std::vector<std::array<double, kMaxDim>>& w) {
  const auto& g = f.grid;
  const int dim = g.dim();
  double e = 0.0;
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    for (int a = 0; a < dim; ++a) {
      if (m[a] + 1 >= g.count(a)) continue;
      const double d = f[i + g.stride(a)] - f[i];
      e += w[i][a] * d * d;
    }
  });
  return e * std::pow(g.h(), g.n() - 1);
}

}  // namespace detail

/// Weighted minimiser with Dirichlet data taken from (h1, h2) on the side
/// walls and top. L nodes carry one shared unknown.
inline LinearizedPair solve_linearized(const ScalarField& h1, const ScalarField& h2, const LinearizedConfig& cfg = {}) {
  if (!(h1.grid == h2.grid)) throw PreconditionError("boundary components on different grids");
  if (!(cfg.tolerance > 0.0) || cfg.max_sweeps < 1) throw ConfigError("invalid linearized solver settings");
  const auto& g = h1.grid;
  const int n = g.n();
  const int dim = g.dim();
  const double cap = cfg.weight_cap > 0.0 ? cfg.weight_cap : 1.0 / g.h();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(h1[i]) || !std::isfinite(h2[i])) throw PreconditionError("boundary data is not finite");
    const auto m = g.multi_index(i);
    if (g.on_L(m) && g.on_dirichlet_boundary(m) && std::abs(h1[i] - h2[i]) > 1e-12)
      throw PreconditionError("boundary components differ on L");
  }
  const auto ew = detail::edge_weights(g, cap);

  LinearizedPair out;
  out.g1 = h1;
  out.g2 = h2;
  std::vector<std::size_t> nodes[2];
  std::vector<std::uint8_t> shared[2];
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    if (g.on_dirichlet_boundary(m)) return;
    int parity = 0;
    for (int a = 0; a <= n; ++a) parity += m[a];
    nodes[parity & 1].push_back(i);
    shared[parity & 1].push_back(g.on_L(m) ? 1 : 0);
    out.g1[i] = out.g2[i] = 0.0;
  });
  double omega = cfg.relaxation;
  if (!(omega > 0.0)) {
    int longest = 2 * (g.count(n) - 1);
    for (int a = 0; a < n; ++a) longest = std::max(longest, g.count(a) - 1);
    omega = 2.0 / (1.0 + std::sin(std::numbers::pi / longest));
  }
  // Weighted neighbour sums of field f at node i with edge weights w.
  auto gather = [&](const ScalarField& f, const std::vector<std::array<double, kMaxDim>>& w, std::size_t i,
                    double& num, double& den) {
    const bool trace = g.on_trace(i);
    num = den = 0.0;
    for (int a = 0; a < dim; ++a) {
      const std::size_t s = g.stride(a);
      const double wu = w[i][a];
      num += wu * f[i + s];
      den += wu;
      if (a == n && trace) continue;  // no stored edge below the trace
      const double wd = w[i - s][a];
      num += wd * f[i - s];
      den += wd;
    }
  };

  auto energy = [&]() { return detail::weighted_energy(out.g1, ew.w1) + detail::weighted_energy(out.g2, ew.w2); };
  double prev = energy();
  out.energy_history.push_back(prev);
  for (int s = 1; s <= cfg.max_sweeps; ++s) {
    for (int colour = 0; colour < 2; ++colour) {
      for (std::size_t q = 0; q < nodes[colour].size(); ++q) {
        const std::size_t i = nodes[colour][q];
        double n1, d1, n2, d2;
        gather(out.g1, ew.w1, i, n1, d1);
        gather(out.g2, ew.w2, i, n2, d2);
        if (shared[colour][q]) {
          if (d1 + d2 > 0.0) {
            const double target = (n1 + n2) / (d1 + d2);
            const double v = out.g1[i] + omega * (target - out.g1[i]);
            out.g1[i] = out.g2[i] = v;
          }
          continue;
        }
        if (d1 > 0.0) out.g1[i] += omega * (n1 / d1 - out.g1[i]);
        if (d2 > 0.0) out.g2[i] += omega * (n2 / d2 - out.g2[i]);
      }
    }
    const double e = energy();
    out.energy_history.push_back(e);
    out.sweeps = s;
    const bool small = prev - e <= cfg.tolerance * std::max(std::abs(e), std::numeric_limits<double>::min());
    prev = e;
    if (small) {
      out.converged = true;
      break;
    }
  }
  out.energy = prev;
  return out;
}

/// (v_1, v_2) = (-|x'|^2/(n-1) + 2(x_n+1) r, -|x'|^2/(n-1) - 2(x_n+1) r).
inline std::array<double, 2> explicit_minimizer(const Point& x, int n) {
  if (n < 2) throw PreconditionError("explicit minimizer needs n >= 2");
  const double q = tangential_norm2(x, n) / (n - 1);
  const double r = edge_distance(x, n);
  const double s = 2.0 * (x[n - 1] + 1.0) * r;
  return {-q + s, -q - s};
}

struct ExpansionCoefficients {
  double a0 = 0.0;
  std::vector<double> a_prime;
  double b1 = 0.0, b2 = 0.0;
  double residual = 0.0;  ///< sup of the fit residual over the tube
  double transmission_defect = 0.0;  ///< |b1 + b2|
  std::size_t samples = 0;
};

inline constexpr double kExpansionTube = 0.1;

/// Joint least squares of g_1, g_2 over {|x' - x0'| <= tube, r <= tube}
/// against a0 + a'.(x' - x0') + b_i r with shared a0, a'.
inline ExpansionCoefficients expansion_at(const ScalarField& g1, const ScalarField& g2, const Point& x0,
                                          double tube = kExpansionTube) {
  const auto& g = g1.grid;
  const int n = g.n();
  if (std::abs(x0[n - 1]) > 1e-12 || x0[n] != 0.0) throw PreconditionError("expansion point must lie on L");
  for (int a = 0; a < n; ++a)
    if (x0[a] - g.lower(a) < 0.2 - 1e-12 || g.upper(a) - x0[a] < 0.2 - 1e-12)
      throw PreconditionError("expansion point closer than 0.2 to the box");
  std::vector<std::size_t> idx;
  std::vector<Point> pts;
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    const Point p = g.coords(m);
    double d2 = 0.0;
    for (int a = 0; a + 1 < n; ++a) d2 += (p[a] - x0[a]) * (p[a] - x0[a]);
    if (std::sqrt(d2) > tube + 1e-12 || edge_distance(p, n) > tube + 1e-12) return;
    idx.push_back(i);
    pts.push_back(p);
  });
  const int cols = n + 2;  // a0, a' (n-1), b1, b2
  const std::size_t rows = 2 * idx.size();
  if (rows < static_cast<std::size_t>(2 * cols)) throw PreconditionError("insufficient sample nodes in the tube");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double r = edge_distance(pts[k], n);
    for (int c = 0; c < 2; ++c) {
      const Eigen::Index row = static_cast<Eigen::Index>(2 * k + c);
      A(row, 0) = 1.0;
      for (int a = 0; a + 1 < n; ++a) A(row, 1 + a) = pts[k][a] - x0[a];
      A(row, n + c) = r;
      y[row] = c == 0 ? g1[idx[k]] : g2[idx[k]];
    }
  }
  const Eigen::VectorXd coef = A.colPivHouseholderQr().solve(y);
  ExpansionCoefficients e;
  e.a0 = coef[0];
  for (int a = 0; a + 1 < n; ++a) e.a_prime.push_back(coef[1 + a]);
  e.b1 = coef[n];
  e.b2 = coef[n + 1];
  e.transmission_defect = std::abs(e.b1 + e.b2);
  e.residual = (A * coef - y).cwiseAbs().maxCoeff();
  e.samples = idx.size();
  return e;
}

inline ExpansionCoefficients expansion_at(const LinearizedPair& p, const Point& x0, double tube = kExpansionTube) {
  return expansion_at(p.g1, p.g2, x0, tube);
}

struct WeightedResidual {
  double g1 = 0.0;  ///< sup |Delta_h(U_n g_1)| at distance >= exclusion from P^-
  double g2 = 0.0;  ///< sup |Delta_h(Ubar_n g_2)| at distance >= exclusion from P^+
};

/// The fields U_n g_1 and Ubar_n g_2 are harmonic off P^- and P^+
/// respectively. Since U_n and Ubar_n are themselves harmonic there, the
/// Laplacian of the product is w Delta_h g + 2 grad w . D_h g with w and its
/// gradient taken in closed form, so the singular weight adds no truncation
/// error. Reported on free nodes at distance at least `exclusion` (default
/// 2h) from the respective half-plane.
inline WeightedResidual weighted_harmonic_residual(const ScalarField& g1, const ScalarField& g2,
                                                   double exclusion = -1.0) {
  const auto& g = g1.grid;
  const int n = g.n();
  if (exclusion < 0.0) exclusion = 2.0 * g.h();
  const double h = g.h();
  // Product-rule Laplacian of P / (2r) times f at node m, P the profile.
  auto product = [&](const ScalarField& f, const HalfPlaneProfile& prof, const MultiIndex& m) {
    const Point p = g.coords(m);
    const double t = p[n - 1], z = p[n];
    const double r = std::hypot(t, z);
    const double v = prof(t, z);
    const auto dp = prof.gradient(t, z);
    const double w = v / (2.0 * r);
    const double wt = dp[0] / (2.0 * r) - v * t / (2.0 * r * r * r);
    const double wz = dp[1] / (2.0 * r) - v * z / (2.0 * r * r * r);
    const std::size_t i = g.index(m);
    double grad = 0.0;
    const double dt = (f[i + g.stride(n - 1)] - f[i - g.stride(n - 1)]) / (2.0 * h);
    grad += wt * dt;
    if (m[n] > 0) grad += wz * (f[i + g.stride(n)] - f[i - g.stride(n)]) / (2.0 * h);
    return w * discrete_laplacian(f, m) + 2.0 * grad;
  };
  WeightedResidual res;
  for_each_node(g, [&](std::size_t, const MultiIndex& m) {
    if (g.on_dirichlet_boundary(m)) return;
    const Point p = g.coords(m);
    const double t = p[n - 1], z = p[n];
    const double to_minus = t <= 0.0 ? z : std::hypot(t, z);
    const double to_plus = t >= 0.0 ? z : std::hypot(t, z);
    if (to_minus >= exclusion - 1e-12) res.g1 = std::max(res.g1, std::abs(product(g1, kU, m)));
    if (to_plus >= exclusion - 1e-12) res.g2 = std::max(res.g2, std::abs(product(g2, kUbar, m)));
  });
  return res;
}

inline WeightedResidual weighted_harmonic_residual(const LinearizedPair& p, double exclusion = -1.0) {
  return weighted_harmonic_residual(p.g1, p.g2, exclusion);
}

}  // namespace segfb
