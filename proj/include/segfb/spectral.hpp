#pragma once

// First eigenvalue of the Laplace-Beltrami operator on S^2 for functions even
// in z that vanish on a prescribed part of the equator, and the
// characteristic exponent of the corresponding homogeneous harmonic function.
//
// Finite volumes on the upper hemisphere in (psi, phi): psi is the angle from
// the north pole, phi the azimuth on the equator measured from e_2 towards
// e_1, so the equator point at phi is (sin phi, cos phi, 0).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "segfb/errors.hpp"
#include "segfb/point.hpp"

namespace segfb {

/// gamma with gamma (gamma + n - 1) = lambda.
inline double char_exponent(double lambda1, int n) {
  if (lambda1 < 0.0) throw PreconditionError("eigenvalue must be nonnegative");
  const double c = 0.5 * (n - 1);
  return std::sqrt(c * c + lambda1) - c;
}

/// Closed equatorial arc [from, to] (radians, to > from, length below 2 pi).
struct EquatorArc {
  double from = 0.0;
  double to = 0.0;
};

struct SphereGridOptions {
  int azimuth_cells = 384;   ///< multiple of 24 puts pi/4, pi/3, pi/2 on nodes
  int polar_cells = 0;       ///< 0: azimuth_cells / 4 (square cells at the equator)
  double tolerance = 1e-12;  ///< relative change of the Rayleigh quotient
  int max_iterations = 20000;
};

struct CapProblem {
  int n = 2;
  double opening = std::numbers::pi / 2;  ///< half-angle of the arc centred at phi = 0
  SphereGridOptions grid{};
};

/// Eigenfunction on the lat-long grid of the closed upper hemisphere.
class HemisphereFunction {
 public:
  HemisphereFunction() = default;
  HemisphereFunction(int polar, int azimuth, std::vector<double> values)
      : polar_(polar), azimuth_(azimuth), values_(std::move(values)) {}

  int polar_cells() const { return polar_; }
  int azimuth_cells() const { return azimuth_; }

  /// Value at ring j (0 = pole), azimuth index k.
  double at(int j, int k) const {
    if (j == 0) return values_[0];
    k %= azimuth_;
    if (k < 0) k += azimuth_;
    return values_[1 + static_cast<std::size_t>(j - 1) * azimuth_ + k];
  }

  /// Bilinear interpolation at a unit direction (x_1, x_2, z); z < 0 by evenness.
  double operator()(const Point& d) const {
    const double z = std::abs(d[2]);
    const double psi = std::acos(std::clamp(z, -1.0, 1.0));
    double phi = std::atan2(d[0], d[1]);
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    const double dpsi = 0.5 * std::numbers::pi / polar_;
    const double dphi = 2.0 * std::numbers::pi / azimuth_;
    const double s = std::min(psi / dpsi, static_cast<double>(polar_));
    const int j = std::min(static_cast<int>(s), polar_ - 1);
    const double fj = s - j;
    const double t = phi / dphi;
    const int k = static_cast<int>(std::floor(t));
    const double fk = t - k;
    auto ring = [&](int jj) { return (1.0 - fk) * at(jj, k) + fk * at(jj, k + 1); };
    return (1.0 - fj) * ring(j) + fj * ring(j + 1);
  }

 private:
  int polar_ = 0;
  int azimuth_ = 0;
  std::vector<double> values_;  // pole, then rings 1..polar_ (equator last)
};

struct EigenReport {
  double lambda1 = 0.0;
  double gamma = 0.0;
  int iterations = 0;
  double residual = 0.0;  ///< ||K u - lambda M u|| / ||lambda M u||
  HemisphereFunction eigenfunction;
};

namespace detail {

inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  return a < 0 ? a + two_pi : a;
}

inline bool in_arcs(double phi, const std::vector<EquatorArc>& arcs, double slack) {
  for (const auto& arc : arcs) {
    const double len = arc.to - arc.from;
    if (len >= 2.0 * std::numbers::pi - slack) return true;  // full circle: no endpoint
    const double off = wrap_angle(phi - arc.from);
    if (off > slack && off < len - slack) return true;
  }
  return false;
}

}  // namespace detail

/// First eigenpair with Dirichlet condition on the equator outside the open
/// arcs. An empty complement (no pinned node) gives lambda = 0.
inline EigenReport lambda1_arcs(const std::vector<EquatorArc>& arcs, int n = 2, const SphereGridOptions& opt = {}) {
  if (n != 2) throw PreconditionError("spherical eigenproblem implemented for n = 2 only");
  if (opt.azimuth_cells < 8) throw ConfigError("azimuth_cells must be at least 8");
  for (const auto& a : arcs)
    if (!(a.to > a.from) || a.to - a.from > 2.0 * std::numbers::pi) throw ConfigError("invalid equatorial arc");
  const int K = opt.azimuth_cells;
  const int J = opt.polar_cells > 0 ? opt.polar_cells : std::max(2, K / 4);
  const double dpsi = 0.5 * std::numbers::pi / J;
  const double dphi = 2.0 * std::numbers::pi / K;
  const double slack = 1e-9 * dphi;

  // Node numbering: pole, rings 1..J. Pinned equator nodes get id -1.
  const std::size_t total = 1 + static_cast<std::size_t>(J) * K;
  std::vector<int> id(total, -1);
  int unknowns = 0;
  id[0] = unknowns++;
  auto node = [&](int j, int k) -> std::size_t {
    k %= K;
    if (k < 0) k += K;
    return j == 0 ? 0 : 1 + static_cast<std::size_t>(j - 1) * K + k;
  };
  for (int j = 1; j <= J; ++j)
    for (int k = 0; k < K; ++k) {
      if (j == J && !detail::in_arcs(k * dphi, arcs, slack)) continue;
      id[node(j, k)] = unknowns++;
    }
  const bool pinned = unknowns < static_cast<int>(total);

  std::vector<Eigen::Triplet<double>> kt;
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(unknowns);
  auto edge = [&](std::size_t a, std::size_t b, double w) {
    const int ia = id[a], ib = id[b];
    if (ia >= 0) kt.emplace_back(ia, ia, w);
    if (ib >= 0) kt.emplace_back(ib, ib, w);
    if (ia >= 0 && ib >= 0) {
      kt.emplace_back(ia, ib, -w);
      kt.emplace_back(ib, ia, -w);
    }
  };
  mass[id[0]] = 2.0 * std::numbers::pi * (1.0 - std::cos(0.5 * dpsi));
  for (int j = 1; j <= J; ++j) {
    const double psi = j * dpsi;
    const double row = j == J ? 0.5 : 1.0;  // equator row: half control volume
    const double area = j == J ? std::sin(psi) * 0.5 * dpsi * dphi : std::sin(psi) * dpsi * dphi;
    for (int k = 0; k < K; ++k) {
      const std::size_t a = node(j, k);
      if (id[a] >= 0) mass[id[a]] = area;
      edge(a, node(j, k + 1), row * dpsi / (std::sin(psi) * dphi));
      edge(a, node(j - 1, k), std::sin(psi - 0.5 * dpsi) * dphi / dpsi);
    }
  }
  Eigen::SparseMatrix<double> Kmat(unknowns, unknowns);
  Kmat.setFromTriplets(kt.begin(), kt.end());

  EigenReport rep;
  Eigen::VectorXd u;
  if (!pinned) {
    u = Eigen::VectorXd::Ones(unknowns);
    rep.lambda1 = 0.0;
  } else {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Kmat);
    if (solver.info() != Eigen::Success) throw ConvergenceError("factorisation of the spherical stiffness failed");
    u = Eigen::VectorXd::Ones(unknowns);
    double lambda = 0.0, prev = std::numeric_limits<double>::infinity();
    bool done = false;
    for (int it = 1; it <= opt.max_iterations; ++it) {
      Eigen::VectorXd next = solver.solve(mass.asDiagonal() * u);
      const double mnorm = std::sqrt(next.dot(mass.asDiagonal() * next));
      u = next / mnorm;
      lambda = u.dot(Kmat * u);  // M-normalised Rayleigh quotient
      rep.iterations = it;
      if (std::abs(lambda - prev) <= opt.tolerance * lambda) {
        done = true;
        break;
      }
      prev = lambda;
    }
    if (!done) throw ConvergenceError("inverse iteration stagnated");
    rep.lambda1 = lambda;
    const Eigen::VectorXd r = Kmat * u - lambda * (mass.asDiagonal() * u);
    rep.residual = r.norm() / (lambda * (mass.asDiagonal() * u).norm());
  }
  if (u.sum() < 0) u = -u;
  std::vector<double> values(total, 0.0);
  for (std::size_t a = 0; a < total; ++a)
    if (id[a] >= 0) values[a] = u[id[a]];
  rep.eigenfunction = HemisphereFunction(J, K, std::move(values));
  rep.gamma = char_exponent(rep.lambda1, n);
  return rep;
}

/// Cap centred at phi = 0 with half-angle `opening`.
inline EigenReport lambda1_cap(const CapProblem& p) {
  if (!(p.opening > 0.0 && p.opening < std::numbers::pi)) throw ConfigError("cap opening must lie in (0, pi)");
  return lambda1_arcs({{-p.opening, p.opening}}, p.n, p.grid);
}

/// Homogeneous extension |X|^gamma f(X/|X|) of an eigenfunction.
inline double homogeneous_extension(const EigenReport& rep, const Point& x) {
  const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  if (r == 0.0) return 0.0;
  Point d{};
  for (int a = 0; a < 3; ++a) d[a] = x[a] / r;
  return std::pow(r, rep.gamma) * rep.eigenfunction(d);
}

}  // namespace segfb
