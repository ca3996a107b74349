#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "segfb/blowup.hpp"
#include "segfb/interface.hpp"
#include "segfb/profiles.hpp"
#include "segfb/solver.hpp"
#include "segfb/spectral.hpp"

using namespace segfb;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Configuration pair_on(const ExtensionGrid& g, double a1 = 1.0, double a2 = 1.0, const Point* nu = nullptr) {
  const int n = g.n();
  Point dir{};
  dir[n - 1] = 1.0;
  if (nu) dir = *nu;
  auto t_of = [=](const Point& p) {
    double t = 0.0;
    for (int a = 0; a < n; ++a) t += p[a] * dir[a];
    return t;
  };
  return make_configuration({sample(g, [=](const Point& p) { return a1 * kU(t_of(p), p[n]); }),
                             sample(g, [=](const Point& p) { return a2 * kUbar(t_of(p), p[n]); })});
}

double sup_diff(const Configuration& a, const Configuration& b) {
  double e = 0.0;
  for (std::size_t c = 0; c < a.k(); ++c)
    for (std::size_t i = 0; i < a[c].size(); ++i) e = std::max(e, std::abs(a[c][i] - b[c][i]));
  return e;
}

}  // namespace

TEST_CASE("rescaling the exact pair returns a multiple of the pair", "[blowup]") {
  const double h = 1.0 / 64;
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, h);
  const auto u = pair_on(g);
  // With output spacing h / t every sample lands on an input node.
  for (double t : {0.5, 0.25}) {
    const auto v = rescale(u, Point{}, t, h / t);
    const auto ref = pair_on(v.grid());
    double lo = 1e300, hi = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < v[c].size(); ++i)
        if (ref[c][i] > 1e-3) {
          lo = std::min(lo, v[c][i] / ref[c][i]);
          hi = std::max(hi, v[c][i] / ref[c][i]);
        }
    CHECK(hi - lo <= 1e-6);
    CHECK(lo == Approx(1.0 / std::sqrt(2.0 * kPi)).epsilon(0.01));
  }
  const auto v = rescale(u, Point{}, 0.5);
  CHECK(height_H(v, Point{}, 1.0) == Approx(1.0).epsilon(0.02));
}

TEST_CASE("rescaling is idempotent on homogeneous fields", "[blowup][property]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto u = make_configuration({sample(g, [](const Point& p) { return p[1] + 0.5 * p[0]; }),
                                     sample(g, [](const Point& p) { return p[0] - p[1]; })});
  const auto once = rescale(u, Point{}, 0.5);
  CHECK(sup_diff(rescale(once, Point{}, 0.5), once) <= 1e-6);
  CHECK(sup_diff(rescale(u, Point{}, 0.25), once) <= 1e-6);
}

TEST_CASE("rescale preconditions", "[blowup]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 16);
  const auto u = pair_on(g);
  CHECK_THROWS_AS(rescale(u, Point{}, 0.0), PreconditionError);
  CHECK_THROWS_AS(rescale(u, make_point({0.6, 0.0}), 0.5), PreconditionError);
  CHECK_THROWS_AS(rescale(u, make_point({0.0, 0.1}), 0.5), PreconditionError);
  const auto zero = make_configuration({ScalarField(g), ScalarField(g)});
  CHECK_THROWS_AS(rescale(zero, Point{}, 0.5), PreconditionError);
}

TEST_CASE("half-plane fit of constructed pairs", "[blowup]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto exact = fit_half_plane_pair(pair_on(g));
  CHECK(exact.converged);
  CHECK(exact.amplitude == Approx(1.0).epsilon(1e-6));
  CHECK(exact.direction[0] == Approx(0.0).margin(1e-6));
  CHECK(exact.direction[1] == Approx(1.0).epsilon(1e-9));
  CHECK(exact.residual <= 1e-6);
  CHECK(exact.degree == Approx(0.5).margin(0.05));

  Point nu{};
  nu[0] = std::sin(kPi / 6);
  nu[1] = std::cos(kPi / 6);
  const auto rot = fit_half_plane_pair(pair_on(g, 2.0, 2.0, &nu));
  CHECK(rot.amplitude == Approx(2.0).epsilon(1e-6));
  CHECK(rot.direction[0] == Approx(nu[0]).margin(1e-6));
  CHECK(rot.direction[1] == Approx(nu[1]).margin(1e-6));
  CHECK(rot.residual <= 1e-4);
  CHECK(std::hypot(rot.direction[0], rot.direction[1]) == Approx(1.0).epsilon(1e-10));

  CHECK_THROWS_AS(fit_half_plane_pair(make_configuration({ScalarField(g)})), PreconditionError);
  const auto small = ExtensionGrid::box(2, 0.5, 0.5, 1.0 / 16);
  CHECK_THROWS_AS(fit_half_plane_pair(pair_on(small)), PreconditionError);
}

TEST_CASE("fit is equivariant under a quarter turn of the trace plane", "[blowup][property]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  auto bumped = [](double x1, double x2, double z, int c) {
    const double base = c == 0 ? kU(x2, z) : 0.9 * kUbar(x2, z);
    return base * (1.0 + 0.1 * x1 * x1);
  };
  const auto u = make_configuration({sample(g, [&](const Point& p) { return bumped(p[0], p[1], p[2], 0); }),
                                     sample(g, [&](const Point& p) { return bumped(p[0], p[1], p[2], 1); })});
  // (x1, x2) -> (-x2, x1) maps e_2 to -e_1.
  const auto w = make_configuration({sample(g, [&](const Point& p) { return bumped(p[1], -p[0], p[2], 0); }),
                                     sample(g, [&](const Point& p) { return bumped(p[1], -p[0], p[2], 1); })});
  const auto fu = fit_half_plane_pair(u);
  const auto fw = fit_half_plane_pair(w);
  CHECK(fw.residual == Approx(fu.residual).margin(1e-6));
  CHECK(fw.amplitude == Approx(fu.amplitude).margin(1e-6));
  CHECK(fw.direction[0] == Approx(-fu.direction[1]).margin(1e-6));
  CHECK(fw.direction[1] == Approx(fu.direction[0]).margin(1e-6));
}

TEST_CASE("blow-up of a solver output at a flat interface point", "[blowup]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto sol = solve_segregated(pair_on(g));
  const auto v = rescale(sol.config, Point{}, 0.5);
  const auto fit = fit_half_plane_pair(v);
  CHECK(fit.residual <= 0.1);
  CHECK(fit.degree == Approx(0.5).margin(0.05));
  CHECK(std::abs(fit.direction[1]) == Approx(1.0).margin(0.02));
}

TEST_CASE("blow-ups of a solver output settle as the scale shrinks", "[blowup]") {
  const double h = 1.0 / 64;
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, h);
  auto data = pair_on(g, 1.0, 1.0);
  // Curved data so that the blow-up limit differs from the input.
  for (auto& f : data.components) f = sample(g, [&](const Point& p) { return interpolate(f, p) * (1.0 + 0.3 * p[1]); });
  const auto sol = solve_segregated(data);
  std::vector<Configuration> v;
  for (double t : {0.8, 0.4, 0.2}) v.push_back(rescale(sol.config, Point{}, t, 1.0 / 16));
  const double d1 = sup_diff(v[0], v[1]);
  const double d2 = sup_diff(v[1], v[2]);
  CHECK(d2 < d1);
}

TEST_CASE("classification of nodal points", "[blowup]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto u = pair_on(g);
  const auto fb = extract_free_boundary(u);
  REQUIRE_FALSE(fb.points.empty());
  const auto cl = classify_nodal_points(u, fb.points);
  for (std::size_t j = 0; j < cl.labels.size(); ++j) {
    CHECK(cl.labels[j] == NodalLabel::Regular);
    CHECK(cl.estimates[j] == Approx(0.5).margin(0.05));
  }
  CHECK_THROWS_AS(classify_nodal_points(u, {make_point({0.5, 0.0})}), PreconditionError);
  CHECK_THROWS_AS(classify_nodal_points(u, fb.points, 0.0), ConfigError);
  CHECK_THROWS_AS(classify_nodal_points(u, {make_point({0.0, 0.1})}), PreconditionError);
}

TEST_CASE("a degree-one cross is singular", "[blowup]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto eig = lambda1_arcs({{0.0, 0.5 * kPi}, {kPi, 1.5 * kPi}});
  const auto cross = make_configuration({sample(g, [&](const Point& p) { return homogeneous_extension(eig, p); }),
                                         sample(g, [&](const Point& p) {
                                           Point q = p;
                                           q[0] = p[1];
                                           q[1] = -p[0];
                                           return homogeneous_extension(eig, q);
                                         })});
  const auto cl = classify_nodal_points(cross, {Point{}});
  CHECK(cl.labels[0] == NodalLabel::Singular);
  CHECK(cl.estimates[0] > 0.6);
}

TEST_CASE("raising delta never turns a regular point singular", "[blowup][property]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 32);
  // An asymmetric solve gives a spread of estimates.
  const auto sol = solve_segregated(pair_on(g, 1.0, 1.4));
  const auto fb = extract_free_boundary(sol.config);
  std::vector<Point> cands;
  for (const auto& p : fb.points)
    if (g.contains_ball(p, 8.0 * g.h())) cands.push_back(p);
  REQUIRE_FALSE(cands.empty());
  std::vector<NodalLabel> prev;
  for (double delta : {0.01, 0.02, 0.05, 0.1, 0.3, 1.0}) {
    const auto cl = classify_nodal_points(sol.config, cands, delta);
    for (std::size_t j = 0; j < cl.labels.size(); ++j) {
      CHECK((cl.labels[j] == NodalLabel::Regular) == (cl.estimates[j] < 0.5 + delta));
      if (!prev.empty() && prev[j] == NodalLabel::Regular) CHECK(cl.labels[j] == NodalLabel::Regular);
    }
    prev = cl.labels;
  }
}

TEST_CASE("reflection law integral", "[blowup]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const double l = 0.5, r = 0.5;
  const double scale = std::pow(2.0 * l, g.n() - 1) * kPi / 4.0;
  CHECK(std::abs(reflection_defect(pair_on(g), l, r)) <= 1e-2 * std::pow(2.0 * l, g.n() - 1));
  CHECK(std::abs(reflection_defect(pair_on(g, 3.0, 3.0), l, r)) <= 9e-2);
  const double d21 = reflection_defect(pair_on(g, 2.0, 1.0), l, r);
  CHECK(d21 == Approx(3.0 * scale).epsilon(0.02));
  CHECK(d21 == Approx(2.3562).epsilon(0.02));

  // Exchanging the amplitudes flips the sign.
  CHECK(reflection_defect(pair_on(g, 1.0, 2.0), l, r) == Approx(-d21).epsilon(1e-6));

  CHECK_THROWS_AS(reflection_defect(pair_on(g), 0.6, r, {512, make_point({0.5, 0.0, 0.0})}), PreconditionError);
  CHECK_THROWS_AS(reflection_defect(pair_on(g), l, 1.2), PreconditionError);
}
