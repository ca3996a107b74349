#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "segfb/almgren.hpp"
#include "segfb/profiles.hpp"

using namespace segfb;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Configuration pair_on(const ExtensionGrid& g, double shift = 0.0) {
  const int n = g.n();
  return make_configuration({sample(g, [=](const Point& p) { return kU(p[n - 1] - shift, p[n]); }),
                             sample(g, [=](const Point& p) { return kUbar(p[n - 1] - shift, p[n]); })});
}

template <class Fn>
Configuration single(const ExtensionGrid& g, Fn fn) {
  return make_configuration({sample(g, fn)});
}

}  // namespace

TEST_CASE("E and H of the exact pair in the plane", "[almgren]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto u = pair_on(g);
  for (double r : {0.125, 0.25, 0.5}) {
    CHECK(energy_E(u, Point{}, r) == Approx(kPi * r).epsilon(0.02));
    CHECK(height_H(u, Point{}, r) == Approx(2.0 * kPi * r).epsilon(0.01));
  }
  const auto rep = frequency_N(u, Point{}, {0.1, 0.2, 0.3, 0.4, 0.5});
  for (double N : rep.N) CHECK(N == Approx(0.5).margin(0.01));
  CHECK(rep.N_zero_plus == Approx(0.5).margin(0.01));
  CHECK(rep.monotonicity_defect < 0.01);
  CHECK(check_logderivative(rep) < 0.02);
}

TEST_CASE("constant fields have zero frequency", "[almgren]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 16);
  const auto u = single(g, [](const Point&) { return 2.0; });
  CHECK(energy_E(u, Point{}, 0.5) == Approx(0.0).margin(1e-12));
  CHECK(height_H(u, Point{}, 0.5) == Approx(4.0 * unit_sphere_measure(2)).epsilon(1e-3));
}

TEST_CASE("homogeneous harmonic fields have frequency equal to their degree", "[almgren][property]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto lin = single(g, [](const Point& p) { return p[0]; });
  const auto quad = single(g, [](const Point& p) { return p[0] * p[0] - p[1] * p[1]; });
  for (double r : {0.25, 0.5}) {
    CHECK(energy_E(lin, Point{}, r) == Approx(kPi * r * r).epsilon(0.01));
    CHECK(height_H(lin, Point{}, r) == Approx(kPi * r * r).epsilon(0.01));
  }
  for (double N : frequency_N(lin, Point{}, {0.2, 0.35, 0.5}).N) CHECK(N == Approx(1.0).epsilon(0.02));
  for (double N : frequency_N(quad, Point{}, {0.2, 0.35, 0.5}).N) CHECK(N == Approx(2.0).epsilon(0.02));

  const auto g2 = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto lin2 = single(g2, [](const Point& p) { return p[1]; });
  for (double N : frequency_N(lin2, Point{}, {0.25, 0.5}).N) CHECK(N == Approx(1.0).epsilon(0.02));
}

TEST_CASE("frequency is invariant under scaling of the field", "[almgren][property]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 32);
  const auto u = pair_on(g);
  auto v = u;
  for (auto& f : v.components)
    for (auto& x : f.values) x *= 7.5;
  const auto a = frequency_N(u, Point{}, {0.2, 0.4});
  const auto b = frequency_N(v, Point{}, {0.2, 0.4});
  for (std::size_t j = 0; j < a.N.size(); ++j) {
    CHECK(b.N[j] == Approx(a.N[j]).epsilon(1e-12));
    CHECK(b.H[j] == Approx(56.25 * a.H[j]).epsilon(1e-12));
  }
}

TEST_CASE("frequency is covariant under lattice translations", "[almgren][property]") {
  const double h = 1.0 / 64;
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, h);
  const double tau = 8.0 * h;
  const auto a = frequency_N(pair_on(g), Point{}, {0.2, 0.4});
  const auto b = frequency_N(pair_on(g, tau), make_point({tau, 0.0}), {0.2, 0.4});
  for (std::size_t j = 0; j < a.N.size(); ++j) CHECK(b.N[j] == Approx(a.N[j]).margin(1e-9));

  // Tangential translation in three dimensions.
  const auto g2 = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto u2 = pair_on(g2);
  const auto c = frequency_N(u2, Point{}, {0.25});
  const auto d = frequency_N(u2, make_point({0.25, 0.0, 0.0}), {0.25});
  CHECK(d.N[0] == Approx(c.N[0]).margin(1e-9));
}

TEST_CASE("doubling bound for the exact pair", "[almgren]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto d = doubling_check(pair_on(g), Point{}, 0.25, 0.5);
  CHECK(d.holds);
  CHECK(d.ratio == Approx(2.0).epsilon(0.02));
  CHECK(d.exponent == Approx(1.0).margin(0.02));
  CHECK_THROWS_AS(doubling_check(pair_on(g), Point{}, 0.5, 0.25), PreconditionError);
}

TEST_CASE("doubling ratio follows the homogeneity degree", "[almgren][property]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto lin = doubling_check(single(g, [](const Point& p) { return p[0]; }), Point{}, 0.25, 0.5);
  CHECK(lin.holds);
  CHECK(lin.ratio == Approx(4.0).epsilon(0.03));
  const auto cst = doubling_check(single(g, [](const Point&) { return 1.5; }), Point{}, 0.25, 0.5);
  CHECK(cst.holds);
  CHECK(cst.ratio == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("frequency of a homogeneous pair is constant in r", "[almgren][property]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 64);
  const auto rep = frequency_N(pair_on(g), Point{}, {0.15, 0.25, 0.35, 0.45, 0.55});
  const auto [lo, hi] = std::minmax_element(rep.N.begin(), rep.N.end());
  CHECK(*hi - *lo <= 0.02);
}

TEST_CASE("Pohozaev identity", "[almgren]") {
  const auto g = ExtensionGrid::box(2, 1.0, 1.0, 1.0 / 32);
  const auto lin = single(g, [](const Point& p) { return p[1]; });
  const auto rep = pohozaev_residual(lin, Point{}, 0.5);
  CHECK_FALSE(rep.degenerate);
  CHECK(rep.volume == Approx(4.0 / 3.0 * kPi * 0.125).epsilon(0.01));
  CHECK(rep.surface == Approx(kPi).epsilon(0.01));
  CHECK(rep.residual < 0.01);

  const auto pair = pair_on(g);
  CHECK(pohozaev_residual(pair, Point{}, 0.5).residual < 0.03);

  const auto zero = single(g, [](const Point&) { return 0.0; });
  CHECK(pohozaev_residual(zero, Point{}, 0.5).degenerate);
}

TEST_CASE("frequency preconditions", "[almgren]") {
  const auto g = ExtensionGrid::box(1, 1.0, 1.0, 1.0 / 16);
  const auto u = pair_on(g);
  CHECK_THROWS_AS(frequency_N(u, Point{}, {0.1}), PreconditionError);  // below 4h
  CHECK_THROWS_AS(frequency_N(u, make_point({0.0, 0.1}), {0.5}), PreconditionError);
  CHECK_THROWS_AS(frequency_N(u, make_point({0.6, 0.0}), {0.5}), PreconditionError);
  CHECK_THROWS_AS(frequency_N(u, Point{}, {}), PreconditionError);
  const auto zero = single(g, [](const Point&) { return 0.0; });
  CHECK_THROWS_AS(frequency_N(zero, Point{}, {0.5}), PreconditionError);
  CHECK_THROWS_AS(check_logderivative(frequency_N(u, Point{}, {0.25, 0.5})), PreconditionError);
}
