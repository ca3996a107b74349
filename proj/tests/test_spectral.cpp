#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "segfb/profiles.hpp"
#include "segfb/spectral.hpp"

using namespace segfb;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

CapProblem cap(double opening, int cells = 384) {
  CapProblem p;
  p.opening = opening;
  p.grid.azimuth_cells = cells;
  return p;
}

}  // namespace

TEST_CASE("characteristic exponent values", "[spectral]") {
  CHECK(char_exponent(0.0, 2) == 0.0);
  CHECK(char_exponent(0.75, 2) == Approx(0.5).epsilon(1e-15));
  CHECK(char_exponent(2.0, 2) == Approx(1.0).epsilon(1e-15));
  CHECK(char_exponent(3.0, 3) == Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(char_exponent(-0.1, 2), PreconditionError);
}

TEST_CASE("characteristic exponent inverts gamma (gamma + n - 1)", "[spectral][property]") {
  for (int n : {1, 2, 3})
    for (int j = 1; j <= 20; ++j) {
      const double g = 0.1 * j;
      CHECK(char_exponent(g * (g + n - 1), n) == Approx(g).margin(1e-12));
    }
}

TEST_CASE("half-equator cap", "[spectral]") {
  const auto rep = lambda1_cap(cap(kPi / 2));
  CHECK(rep.lambda1 == Approx(0.75).margin(0.03));
  CHECK(rep.gamma == Approx(0.5).margin(0.02));
  CHECK(rep.gamma == Approx(char_exponent(rep.lambda1, 2)).epsilon(1e-15));
  CHECK(rep.residual < 1e-6);

  // The eigenfunction is a multiple of U(x_2, z) on the sphere.
  std::vector<double> ratios;
  for (double psi : {0.2, 0.7, 1.2})
    for (double phi : {0.3, 1.5, 2.8}) {
      const Point d = make_point({std::sin(psi) * std::sin(phi), std::sin(psi) * std::cos(phi), std::cos(psi)});
      ratios.push_back(rep.eigenfunction(d) / kU(d[1], d[2]));
    }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  CHECK(*lo > 0.0);
  CHECK(*hi / *lo == Approx(1.0).margin(0.02));
}

TEST_CASE("eigenvalue decreases strictly with the opening", "[spectral][property]") {
  const double a = lambda1_cap(cap(kPi / 4)).lambda1;
  const double b = lambda1_cap(cap(kPi / 2)).lambda1;
  const double c = lambda1_cap(cap(3 * kPi / 4)).lambda1;
  // Margins must exceed the change between two resolutions.
  const double noise = std::abs(lambda1_cap(cap(kPi / 2, 192)).lambda1 - b);
  CHECK(a - b > 10.0 * noise);
  CHECK(b - c > 10.0 * noise);
}

TEST_CASE("one-third equator cap exceeds the half-plane exponent", "[spectral]") {
  const auto fine = lambda1_cap(cap(kPi / 3));
  const auto coarse = lambda1_cap(cap(kPi / 3, 192));
  const double margin = fine.gamma - 0.5;
  CHECK(margin > 0.0);
  CHECK(margin > 10.0 * std::abs(fine.gamma - coarse.gamma));
}

TEST_CASE("no Dirichlet set gives a constant eigenfunction", "[spectral]") {
  const auto rep = lambda1_arcs({{0.0, 2.0 * kPi}});
  CHECK(rep.lambda1 == 0.0);
  CHECK(rep.gamma == 0.0);
  const Point a = make_point({0.0, 0.0, 1.0}), b = make_point({0.6, 0.0, 0.8});
  CHECK(rep.eigenfunction(a) == Approx(rep.eigenfunction(b)));
  // Nearly full openings approach zero.
  CHECK(lambda1_cap(cap(0.95 * kPi)).lambda1 < lambda1_cap(cap(3 * kPi / 4)).lambda1);
}

TEST_CASE("homogeneous extension scales with the exponent", "[spectral][property]") {
  const auto rep = lambda1_cap(cap(kPi / 2, 192));
  const Point x = make_point({0.2, 0.3, 0.4});
  Point y{};
  for (int a = 0; a < 3; ++a) y[a] = 2.5 * x[a];
  CHECK(homogeneous_extension(rep, y) == Approx(std::pow(2.5, rep.gamma) * homogeneous_extension(rep, x)));
  CHECK(homogeneous_extension(rep, Point{}) == 0.0);
  // Vanishes on the pinned half of the equator.
  CHECK(homogeneous_extension(rep, make_point({0.0, -0.5, 0.0})) == Approx(0.0).margin(1e-12));
}

TEST_CASE("spectral configuration errors", "[spectral]") {
  CHECK_THROWS_AS(lambda1_cap(cap(0.0)), ConfigError);
  CHECK_THROWS_AS(lambda1_cap(cap(kPi)), ConfigError);
  CHECK_THROWS_AS(lambda1_cap(cap(kPi / 2, 4)), ConfigError);
  CHECK_THROWS_AS(lambda1_arcs({{1.0, 0.5}}), ConfigError);
  CHECK_THROWS_AS(lambda1_arcs({{0.0, 1.0}}, 3), PreconditionError);
  CapProblem p = cap(kPi / 2, 48);
  p.grid.max_iterations = 1;
  CHECK_THROWS_AS(lambda1_cap(p), ConvergenceError);
}
