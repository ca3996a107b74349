#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "segfb/linearized.hpp"

using namespace segfb;
using Catch::Approx;

namespace {

ScalarField explicit_component(const ExtensionGrid& g, int c) {
  const int n = g.n();
  return sample(g, [n, c](const Point& p) { return explicit_minimizer(p, n)[c]; });
}

double sup_diff(const ScalarField& a, const ScalarField& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
  return e;
}

}  // namespace

TEST_CASE("explicit minimizer values", "[linearized]") {
  const auto o = explicit_minimizer(Point{}, 2);
  CHECK(o[0] == 0.0);
  CHECK(o[1] == 0.0);
  const auto v = explicit_minimizer(make_point({0.0, 0.0, 1.0}), 2);
  CHECK(v[0] == Approx(2.0));
  CHECK(v[1] == Approx(-2.0));
  // x' = 0.5, x_n = 0.3, z = 0.4: r = 0.5, 2 (1.3) 0.5 = 1.3.
  const auto w = explicit_minimizer(make_point({0.5, 0.3, 0.4}), 2);
  CHECK(w[0] == Approx(-0.25 + 1.3));
  CHECK(w[1] == Approx(-0.25 - 1.3));
  CHECK_THROWS_AS(explicit_minimizer(Point{}, 1), PreconditionError);
}

TEST_CASE("constants are reproduced exactly", "[linearized]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto c = sample(g, [](const Point&) { return 0.7; });
  const auto p = solve_linearized(c, c);
  CHECK(p.converged);
  CHECK(sup_diff(p.g1, c) <= 1e-9);
  CHECK(sup_diff(p.g2, c) <= 1e-9);
  const auto res = weighted_harmonic_residual(c, c);
  CHECK(res.g1 == Approx(0.0).margin(1e-12));
  CHECK(res.g2 == Approx(0.0).margin(1e-12));
  const auto e = expansion_at(c, c, Point{});
  CHECK(e.a0 == Approx(0.7).epsilon(1e-12));
  CHECK(e.a_prime[0] == Approx(0.0).margin(1e-12));
  CHECK(e.b1 == Approx(0.0).margin(1e-12));
  CHECK(e.b2 == Approx(0.0).margin(1e-12));
}

TEST_CASE("tangential linear data is reproduced", "[linearized]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto x1 = sample(g, [](const Point& p) { return p[0]; });
  const auto p = solve_linearized(x1, x1);
  CHECK(p.converged);
  CHECK(sup_diff(p.g1, x1) <= 1e-5);
  CHECK(sup_diff(p.g2, x1) <= 1e-5);
  const auto e = expansion_at(p, Point{});
  CHECK(e.a_prime[0] == Approx(1.0).epsilon(1e-4));
  CHECK(std::abs(e.b1) <= 1e-4);
  CHECK(std::abs(e.b2) <= 1e-4);
}

TEST_CASE("explicit pair is the minimizer for its own boundary data", "[linearized]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto v1 = explicit_component(g, 0);
  const auto v2 = explicit_component(g, 1);
  const auto p = solve_linearized(v1, v2);
  CHECK(p.converged);
  CHECK(sup_diff(p.g1, v1) <= 0.05);
  CHECK(sup_diff(p.g2, v2) <= 0.05);
  for (std::size_t i = 1; i < p.energy_history.size(); ++i) CHECK(p.energy_history[i] <= p.energy_history[i - 1]);
  for (double x1 : {-0.4, -0.2, 0.0, 0.2, 0.4}) {
    Point x0{};
    x0[0] = x1;
    CHECK(expansion_at(p, x0).transmission_defect <= 0.05);
  }
}

TEST_CASE("expansion of the sampled explicit pair", "[linearized]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto e = expansion_at(explicit_component(g, 0), explicit_component(g, 1), Point{});
  CHECK(e.a0 == Approx(0.0).margin(0.01));
  CHECK(e.a_prime[0] == Approx(0.0).margin(1e-9));
  CHECK(e.b1 == Approx(2.0).margin(0.05));
  CHECK(e.b2 == Approx(-2.0).margin(0.05));
  CHECK(e.transmission_defect <= 1e-9);
  CHECK(e.samples > 0);

  const auto c = sample(g, [](const Point&) { return 1.0; });
  CHECK_THROWS_AS(expansion_at(c, c, make_point({0.0, 0.1, 0.0})), PreconditionError);
  CHECK_THROWS_AS(expansion_at(c, c, make_point({0.9, 0.0, 0.0})), PreconditionError);
  CHECK_THROWS_AS(expansion_at(c, c, Point{}, 1e-3), PreconditionError);
}

TEST_CASE("solutions depend linearly on the boundary data", "[linearized][property]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto a1 = explicit_component(g, 0), a2 = explicit_component(g, 1);
  const auto b = sample(g, [](const Point& p) { return p[0] * p[0] - 0.5 * p[0]; });
  const auto pa = solve_linearized(a1, a2);
  const auto pb = solve_linearized(b, b);
  ScalarField c1(g), c2(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    c1[i] = 2.0 * a1[i] - 3.0 * b[i];
    c2[i] = 2.0 * a2[i] - 3.0 * b[i];
  }
  const auto pc = solve_linearized(c1, c2);
  double e = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    e = std::max(e, std::abs(pc.g1[i] - 2.0 * pa.g1[i] + 3.0 * pb.g1[i]));
    e = std::max(e, std::abs(pc.g2[i] - 2.0 * pa.g2[i] + 3.0 * pb.g2[i]));
  }
  CHECK(e <= 1e-4);
}

TEST_CASE("ordered boundary data give ordered solutions", "[linearized][property]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto v1 = explicit_component(g, 0), v2 = explicit_component(g, 1);
  const auto bump = sample(g, [](const Point& p) { return 0.2 * (1.0 + p[0] * p[1]); });
  const auto x1 = sample(g, [](const Point& p) { return p[0]; });
  struct Case {
    ScalarField lo1, lo2, hi1, hi2;
  };
  std::vector<Case> cases;
  ScalarField w1 = v1, w2 = v2, y = x1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    w1[i] += bump[i];
    w2[i] += bump[i];
    y[i] += 0.1 + bump[i];
  }
  cases.push_back({v1, v2, w1, w2});
  cases.push_back({x1, x1, y, y});
  cases.push_back({v2, v2, v1, v1});
  for (const auto& c : cases) {
    const auto lo = solve_linearized(c.lo1, c.lo2);
    const auto hi = solve_linearized(c.hi1, c.hi2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      CHECK(lo.g1[i] <= hi.g1[i] + 1e-8);
      CHECK(lo.g2[i] <= hi.g2[i] + 1e-8);
    }
  }
}

TEST_CASE("positive solutions stay positive near the edge", "[linearized][property]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const int n = g.n();
  // Nonnegative data; the pair is normalised by its value at e_n / 4.
  for (double s : {0.0, 0.5, 1.0}) {
    const auto h = sample(g, [=](const Point& p) { return 1.0 + s * p[0] + 0.5 * p[1] * p[1]; });
    const auto p = solve_linearized(h, h);
    Point q{};
    q[n - 1] = 0.25;
    const double scale = 1.0 / interpolate(p.g1, q);
    REQUIRE(scale > 0.0);
    double lo = 1e300;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (norm(g.coords(i), g.dim()) <= 0.05 + 1e-12) lo = std::min({lo, scale * p.g1[i], scale * p.g2[i]});
    CHECK(lo > 0.0);
  }
}

TEST_CASE("weighted residual of the explicit pair shrinks with h", "[linearized]") {
  double prev = 1e300;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const auto g = ExtensionGrid::box(2, 1.0, 1.0, h);
    const auto res = weighted_harmonic_residual(explicit_component(g, 0), explicit_component(g, 1), 0.2);
    const double r = std::max(res.g1, res.g2);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("weighted residual of converged solves shrinks with h", "[linearized]") {
  double prev = 1e300;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32}) {
    const auto g = ExtensionGrid::box(2, 1.0, 1.0, h);
    LinearizedConfig cfg;
    cfg.tolerance = 1e-14;
    const auto p = solve_linearized(explicit_component(g, 0), explicit_component(g, 1), cfg);
    const auto res = weighted_harmonic_residual(p, 0.2);
    const double r = std::max(res.g1, res.g2);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("linearized solver preconditions", "[linearized]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 8);
  const auto a = sample(g, [](const Point&) { return 1.0; });
  const auto b = sample(g, [](const Point&) { return 2.0; });
  CHECK_THROWS_AS(solve_linearized(a, b), PreconditionError);
  const auto other = sample(ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 4), [](const Point&) { return 1.0; });
  CHECK_THROWS_AS(solve_linearized(a, other), PreconditionError);
  LinearizedConfig bad;
  bad.tolerance = 0.0;
  CHECK_THROWS_AS(solve_linearized(a, a, bad), ConfigError);
  LinearizedConfig short_run;
  short_run.max_sweeps = 1;
  short_run.tolerance = 1e-15;
  const auto v1 = explicit_component(g, 0), v2 = explicit_component(g, 1);
  CHECK_FALSE(solve_linearized(v1, v2, short_run).converged);
}
