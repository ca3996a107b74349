#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "segfb/field_io.hpp"
#include "segfb/grid.hpp"
#include "segfb/profiles.hpp"

using namespace segfb;
using Catch::Approx;

namespace {

double sup_laplacian_of_U(double h, double r_min) {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, h);
  const auto f = sample(g, [](const Point& p) { return kU(p[1], p[2]); });
  double sup = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi_index(i);
    if (g.on_dirichlet_boundary(m)) continue;
    if (edge_distance(g.coords(m), 2) < r_min) continue;
    if (m[2] == 0 && f[i] == 0.0) continue;  // U is not harmonic across its zero set
    sup = std::max(sup, std::abs(discrete_laplacian(f, m)));
  }
  return sup;
}

}  // namespace

TEST_CASE("grid geometry and node predicates", "[grid]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 0.25);
  CHECK(g.count(0) == 9);
  CHECK(g.count(2) == 5);
  CHECK(g.size() == 9u * 9u * 5u);
  CHECK(g.edge_index() == 4);
  const auto m = g.nearest(make_point({0.0, 0.0, 0.0}));
  CHECK(g.on_L(m));
  CHECK(g.in_P_plus(m));
  CHECK(g.in_P_minus(m));
  CHECK(g.on_trace(m));
  CHECK_FALSE(g.on_dirichlet_boundary(m));
  CHECK(g.on_dirichlet_boundary(g.nearest(make_point({1.0, 0.0, 0.0}))));
  CHECK(g.on_dirichlet_boundary(g.nearest(make_point({0.0, 0.0, 1.0}))));
  CHECK(g.contains_ball(make_point({0.0, 0.0, 0.0}), 1.0));
  CHECK_FALSE(g.contains_ball(make_point({0.5, 0.0, 0.0}), 0.6));
  for (std::size_t i = 0; i < g.size(); i += 7) CHECK(g.index(g.multi_index(i)) == i);
}

TEST_CASE("grid construction errors", "[grid]") {
  CHECK_THROWS_AS(ExtensionGrid::box(2, 1.0, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(ExtensionGrid::box(2, 1.0, 1.0, 0.3), ConfigError);
  CHECK_THROWS_AS(ExtensionGrid::box(0, 1.0, 1.0, 0.25), ConfigError);
  CHECK_THROWS_AS(ExtensionGrid(2, {-1.0, -0.3}, {1.0, 1.0}, 1.0, 0.25), ConfigError);
}

TEST_CASE("discrete Laplacian on polynomials", "[grid]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 0.125);
  const auto affine = sample(g, [](const Point& p) { return 1.5 + 2.0 * p[0] - 0.7 * p[1]; });
  const auto quad = sample(g, [](const Point& p) { return p[0] * p[0] + p[1] * p[1] + p[2] * p[2]; });
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi_index(i);
    if (g.on_dirichlet_boundary(m)) continue;
    CHECK(discrete_laplacian(affine, m) == Approx(0.0).margin(1e-12));
    CHECK(discrete_laplacian(quad, m) == Approx(6.0).margin(1e-10));
  }
}

TEST_CASE("Laplacian of sampled U is second order away from L", "[grid][property]") {
  const double a = sup_laplacian_of_U(1.0 / 16, 0.25);
  const double b = sup_laplacian_of_U(1.0 / 32, 0.25);
  const double c = sup_laplacian_of_U(1.0 / 64, 0.25);
  CHECK(std::log2(a / b) >= 1.9);
  CHECK(std::log2(b / c) >= 1.9);
  // Pointwise bound C h^2 r^{-7/2} on r >= 0.1.
  const double h = 1.0 / 32;
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, h);
  const auto f = sample(g, [](const Point& p) { return kU(p[1], p[2]); });
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto m = g.multi_index(i);
    if (g.on_dirichlet_boundary(m)) continue;
    const double r = edge_distance(g.coords(m), 2);
    if (r < 0.1 || (m[2] == 0 && f[i] == 0.0)) continue;
    CHECK(std::abs(discrete_laplacian(f, m)) <= 0.5 * h * h * std::pow(r, -3.5));
  }
}

TEST_CASE("even reflection matches the full-grid Laplacian", "[grid][property]") {
  auto fn = [](const Point& p) { return std::cos(p[0]) * std::exp(p[1]) + p[2] * p[2] * (1.0 + p[0]); };
  const auto half = ExtensionGrid::box(2, 1.0, 1.0, 0.125);
  const auto full = ExtensionGrid(2, {-1.0, -1.0}, {1.0, 1.0}, 2.0, 0.125);
  const auto fh = sample(half, fn);
  // The full grid covers z in [-1, 1] through a shifted copy of the box.
  const auto ff = sample(full, [&](const Point& p) {
    Point q = p;
    q[2] = p[2] - 1.0;
    return fn(q);
  });
  for (std::size_t i = 0; i < half.size(); ++i) {
    const auto m = half.multi_index(i);
    if (!half.on_trace(m) || half.on_dirichlet_boundary(m)) continue;
    auto mf = m;
    mf[2] = 8;  // z = 0 in the shifted full grid
    CHECK(discrete_laplacian(fh, m) == Approx(discrete_laplacian(ff, mf)).margin(1e-12));
  }
}

TEST_CASE("interpolation", "[grid]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 0.125);
  const auto bilin = sample(g, [](const Point& p) { return 1.0 + p[0] * p[1] - 2.0 * p[2] + p[0] * p[1] * p[2]; });
  CHECK(interpolate(bilin, make_point({0.25, -0.5, 0.375})) == Approx(bilin[g.index(g.nearest(make_point({0.25, -0.5, 0.375})))]));
  CHECK(interpolate(bilin, make_point({0.3, -0.41, 0.77})) == Approx(1.0 - 0.3 * 0.41 - 1.54 - 0.3 * 0.41 * 0.77));
  // Evenness: z < 0 reads the reflected value.
  CHECK(interpolate(bilin, make_point({0.3, 0.2, -0.1})) == Approx(interpolate(bilin, make_point({0.3, 0.2, 0.1}))));
  CHECK_THROWS_AS(interpolate(bilin, make_point({1.2, 0.0, 0.0})), PreconditionError);

  // U at smooth points: the error is bounded by h^2 times a second-derivative bound.
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const auto gg = ExtensionGrid::box(2, 1.0, 1.0, h);
    const auto u = sample(gg, [](const Point& p) { return kU(p[1], p[2]); });
    for (const Point& x : {make_point({0.1, 0.53, 0.31}), make_point({-0.2, -0.41, 0.47}), make_point({0.0, 0.71, 0.05})}) {
      // |D^2 U| <= r^{-3/2} / 4 away from L.
      const double r = edge_distance(x, 2) - 2.0 * h;
      CHECK(std::abs(interpolate(u, x) - kU(x[1], x[2])) <= 0.25 * h * h * std::pow(r, -1.5));
    }
  }
}

TEST_CASE("interpolation does not overshoot", "[grid][property]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 0.25);
  const auto u = sample(g, [](const Point& p) { return std::sin(7.0 * p[0]) * std::cos(5.0 * p[1]); });
  for (double x = -0.99; x < 1.0; x += 0.083)
    for (double z = 0.01; z < 1.0; z += 0.071) {
      const int i = std::min(static_cast<int>(std::floor((x + 1.0) / 0.25)), 7);
      const int k = std::min(static_cast<int>(std::floor(z / 0.25)), 3);
      double lo = 1e9, hi = -1e9;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          MultiIndex m{};
          m[0] = i + a;
          m[1] = k + b;
          lo = std::min(lo, u[g.index(m)]);
          hi = std::max(hi, u[g.index(m)]);
        }
      const double v = interpolate(u, make_point({x, z}));
      CHECK(v >= lo - 1e-14);
      CHECK(v <= hi + 1e-14);
    }
}

TEST_CASE("ball and sphere quadrature of constants", "[grid]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const Point c{};
  for (double r : {0.25, 0.5, 0.8}) {
    const double vol = quad_ball(g, [](const Point&) { return 1.0; }, c, r);
    CHECK(vol == Approx(4.0 / 3.0 * std::numbers::pi * r * r * r).epsilon(0.005));
    const double area = quad_sphere(g, [](const Point&, const Point&) { return 1.0; }, c, r);
    CHECK(area == Approx(4.0 * std::numbers::pi * r * r).epsilon(0.005));
  }
  CHECK(unit_sphere_measure(1) == Approx(2.0 * std::numbers::pi));
  CHECK(unit_sphere_measure(2) == Approx(4.0 * std::numbers::pi));
  CHECK_THROWS_AS(quad_sphere(g, [](const Point&, const Point&) { return 1.0; }, c, 1.5), PreconditionError);
  CHECK_THROWS_AS(quad_ball(g, [](const Point&) { return 1.0; }, make_point({0.0, 0.0, 0.1}), 0.2), PreconditionError);
}

TEST_CASE("sphere quadrature of the pair in the plane", "[grid]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto u = sample(g, [](const Point& p) { return kU(p[0], p[1]); });
  const auto v = sample(g, [](const Point& p) { return kUbar(p[0], p[1]); });
  for (double r : {0.2, 0.5}) {
    const double s = quad_sphere(
        g,
        [&](const Point& p, const Point&) {
          const double a = interpolate(u, p), b = interpolate(v, p);
          return a * a + b * b;
        },
        Point{}, r);
    CHECK(s / r == Approx(2.0 * std::numbers::pi * r).epsilon(0.01));
  }
}

TEST_CASE("quadrature converges under refinement", "[grid][property]") {
  auto fn = [](const Point& p) { return std::exp(p[0]) * (1.0 + p[1] * p[1]) * std::cos(p[2]); };
  const Point c = make_point({0.1, -0.05, 0.0});
  const double r = 0.4;
  std::vector<double> vals;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64})
    vals.push_back(quad_ball(ExtensionGrid::box(2, 1.0, 1.0, h), fn, c, r));
  const double e1 = std::abs(vals[1] - vals[3]), e0 = std::abs(vals[0] - vals[3]);
  CHECK(e1 < e0 / 2.0);
}

TEST_CASE("coarsening keeps every other node", "[grid]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 0.125);
  const auto f = sample(g, [](const Point& p) { return p[0] + 10.0 * p[1] + 100.0 * p[2]; });
  const auto c = coarsen(f);
  CHECK(c.grid.h() == 0.25);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point p = c.grid.coords(i);
    CHECK(c[i] == Approx(p[0] + 10.0 * p[1] + 100.0 * p[2]));
  }
  const auto odd = ExtensionGrid(2, {-1.0, -1.0}, {1.0, 1.0}, 0.75, 0.25);
  CHECK_THROWS_AS(coarsen(ScalarField(odd)), PreconditionError);
}

TEST_CASE("segregation predicate", "[grid]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 0.25);
  auto u = make_configuration({sample(g, [](const Point& p) { return kU(p[0], p[1]); }),
                               sample(g, [](const Point& p) { return kUbar(p[0], p[1]); })});
  CHECK(is_segregated(u));
  u[1][g.index(g.nearest(make_point({0.5, 0.0})))] = 0.1;
  CHECK_FALSE(is_segregated(u));
  CHECK_THROWS_AS(make_configuration({ScalarField(g), ScalarField(ExtensionGrid::box(1, 1.0, 1.0, 0.5))}),
                  PreconditionError);
}

TEST_CASE("field files round-trip bit for bit", "[grid]") {
  const auto g = ExtensionGrid::box(2, 1.0, 0.5, 0.25);
  const auto f = sample(g, [](const Point& p) { return std::sin(p[0] + 3.0 * p[1]) / (1.0 + p[2]); });
  std::stringstream ss;
  write_field(ss, f);
  const auto back = read_field(ss);
  CHECK(back.grid == g);
  CHECK(back.values == f.values);
  const std::string path = "test_grid_roundtrip.sfld";
  save_field(path, f);
  CHECK(load_field(path).values == f.values);
  std::remove(path.c_str());

  std::stringstream bad("{\"format\":\"other\"}\n");
  CHECK_THROWS_AS(read_field(bad), ConfigError);
  std::stringstream truncated;
  write_field(truncated, f);
  std::string s = truncated.str();
  std::stringstream cut(s.substr(0, s.size() - 3));
  CHECK_THROWS_AS(read_field(cut), ConfigError);
}
