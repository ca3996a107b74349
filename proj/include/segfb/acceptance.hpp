#pragma once

// The twelve desk-scale acceptance checks, shared by the acceptance test
// binary and the `verify-all` subcommand.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfb/almgren.hpp"
#include "segfb/blowup.hpp"
#include "segfb/flatness.hpp"
#include "segfb/linearized.hpp"
#include "segfb/profiles.hpp"
#include "segfb/report.hpp"
#include "segfb/solver.hpp"
#include "segfb/spectral.hpp"

namespace segfb {

struct AcceptanceOptions {
  double h = 1.0 / 64;         ///< desk-scale spacing
  double h_solver = 1.0 / 32;  ///< spacing of the solver-recovery and linearized checks
  double flat_curvature = 0.09;  ///< kappa of the curved front x_n = kappa x_1^2 in the flatness check
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string summary;
  nlohmann::json details;
  double seconds = 0.0;
};

namespace acceptance {

inline Point origin() { return Point{}; }

inline ExtensionGrid desk_grid(double h) { return ExtensionGrid::box(2, 1.0, 1.0, h); }

inline Configuration exact_pair(const ExtensionGrid& g, double a1 = 1.0, double a2 = 1.0) {
  const int n = g.n();
  return sample_boundary(g, {[=](const Point& p) { return a1 * kU(p[n - 1], p[n]); },
                             [=](const Point& p) { return a2 * kUbar(p[n - 1], p[n]); }});
}

inline const std::vector<double>& frequency_radii() {
  static const std::vector<double> r{0.1, 0.2, 0.3, 0.4, 0.5};
  return r;
}

inline std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

inline std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

inline std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

/// Runs a check, records its wall time and turns library errors into a failure.
inline CriterionResult timed(int id, const std::string& name, const std::function<void(CriterionResult&)>& body) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.summary = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace acceptance

inline CriterionResult check_frequency_constancy(const AcceptanceOptions& o = {}) {
  return acceptance::timed(1, "frequency constancy", [&](CriterionResult& r) {
    const auto u = acceptance::exact_pair(acceptance::desk_grid(o.h));
    const auto rep = frequency_N(u, acceptance::origin(), acceptance::frequency_radii());
    double lo = 1e300, hi = -1e300;
    for (double v : rep.N) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    r.details = to_json(rep, 3);
    r.passed = lo >= 0.49 && hi <= 0.51;
    r.summary = acceptance::fmt("N in [%.4f, %.4f], band [0.49, 0.51]", lo, hi);
  });
}

inline CriterionResult check_frequency_monotonicity(const AcceptanceOptions& o = {}) {
  return acceptance::timed(2, "frequency monotonicity", [&](CriterionResult& r) {
    const auto g = acceptance::desk_grid(o.h);
    const auto sol = solve_segregated(acceptance::exact_pair(g));
    const auto rep = frequency_N(sol.config, acceptance::origin(), acceptance::frequency_radii());
    r.details = {{"solve", to_json(sol)}, {"frequency", to_json(rep, 3)}};
    r.passed = sol.converged && rep.monotonicity_defect <= 0.02;
    r.summary = acceptance::fmt("defect %.4f (max 0.02), sweeps %.0f", rep.monotonicity_defect, sol.sweeps);
  });
}

inline CriterionResult check_log_derivative(const AcceptanceOptions& o = {}) {
  return acceptance::timed(3, "log-derivative identity", [&](CriterionResult& r) {
    const auto u = acceptance::exact_pair(acceptance::desk_grid(o.h));
    const auto rep = frequency_N(u, acceptance::origin(), acceptance::frequency_radii());
    const double d = check_logderivative(rep);
    r.details = {{"defect", d}};
    r.passed = d <= 0.05;
    r.summary = acceptance::fmt("max relative defect %.4f (max 0.05)", d);
  });
}

inline CriterionResult check_pohozaev(const AcceptanceOptions& o = {}) {
  return acceptance::timed(4, "Pohozaev balance", [&](CriterionResult& r) {
    const auto u = acceptance::exact_pair(acceptance::desk_grid(o.h));
    double worst = 0.0;
    r.details = nlohmann::json::array();
    for (double rad : {0.25, 0.3125, 0.375, 0.4375, 0.5}) {
      const auto p = pohozaev_residual(u, acceptance::origin(), rad);
      worst = std::max(worst, p.residual);
      r.details.push_back({{"r", rad}, {"residual", p.residual}});
    }
    r.passed = worst <= 0.05;
    r.summary = acceptance::fmt("max residual %.4f over r in [0.25, 0.5] (max 0.05)", worst);
  });
}

inline CriterionResult check_reflection(const AcceptanceOptions& o = {}) {
  return acceptance::timed(5, "reflection law", [&](CriterionResult& r) {
    const auto g = acceptance::desk_grid(o.h);
    const double l = 0.5, rad = 0.5;
    const double scale = std::pow(2.0 * l, g.n() - 1) * std::numbers::pi / 4.0;
    bool ok = true;
    double worst = 0.0;
    r.details = nlohmann::json::array();
    for (auto [a1, a2] : {std::pair{1.0, 1.0}, std::pair{2.0, 1.0}, std::pair{1.0, 2.0}}) {
      const double d = reflection_defect(acceptance::exact_pair(g, a1, a2), l, rad);
      const double expected = scale * (a1 * a1 - a2 * a2);
      // Relative 2 % for a nonzero target, 2 % of the unit-amplitude scale for zero.
      const double err = std::abs(d - expected) / (expected != 0.0 ? std::abs(expected) : scale);
      worst = std::max(worst, err);
      ok = ok && err <= 0.02;
      r.details.push_back({{"a1", a1}, {"a2", a2}, {"defect", d}, {"expected", expected}});
    }
    r.passed = ok;
    r.summary = acceptance::fmt("worst relative error %.4f (max 0.02)", worst);
  });
}

inline CriterionResult check_solver_recovery(const AcceptanceOptions& o = {}) {
  return acceptance::timed(6, "solver recovery", [&](CriterionResult& r) {
    const auto g = acceptance::desk_grid(o.h_solver);
    const auto exact = acceptance::exact_pair(g);
    const auto t0 = std::chrono::steady_clock::now();
    const auto sol = solve_segregated(exact);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    double err = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(sol.config[c][i] - exact[c][i]));
    r.details = {{"solve", to_json(sol)}, {"linf", err}, {"h", o.h_solver}, {"seconds", secs}};
    r.passed = sol.converged && err <= 0.05 && secs < 300.0;
    r.summary = acceptance::fmt("Linf %.4f (max 0.05) at h = 1/%.0f in %.1f s", err, 1.0 / o.h_solver, secs);
  });
}

inline CriterionResult check_subsolution_decay(const AcceptanceOptions& = {}) {
  return acceptance::timed(7, "subsolution expansion", [&](CriterionResult& r) {
    double worst = -1e300;
    r.details = nlohmann::json::array();
    for (double beta : {0.0, 1.0})
      for (int comp : {1, 2}) {
        const auto pts = half_ball_samples(2, 1.0, 0.1, comp == 1 ? Orientation::Plus : Orientation::Minus);
        const auto rep = check_subsolution_expansion(beta, 2, comp, {10.0, 20.0, 40.0}, pts);
        worst = std::max(worst, rep.loglog_slope);
        r.details.push_back({{"beta", beta}, {"component", comp}, {"slope", rep.loglog_slope},
                             {"sup_deviation", rep.sup_deviation}});
      }
    r.passed = worst <= -1.7;
    r.summary = acceptance::fmt("flattest log-log slope %.3f (max -1.7)", worst);
  });
}

inline CriterionResult check_linearized_transmission(const AcceptanceOptions& o = {}) {
  return acceptance::timed(8, "linearized transmission", [&](CriterionResult& r) {
    const auto g = acceptance::desk_grid(o.h_solver);
    const int n = g.n();
    const auto v1 = sample(g, [n](const Point& p) { return explicit_minimizer(p, n)[0]; });
    const auto v2 = sample(g, [n](const Point& p) { return explicit_minimizer(p, n)[1]; });
    const auto sampled = expansion_at(v1, v2, acceptance::origin());
    const bool regression = std::abs(sampled.b1 - 2.0) <= 0.05 && std::abs(sampled.b2 + 2.0) <= 0.05;
    const auto pair = solve_linearized(v1, v2);
    double worst = 0.0;
    nlohmann::json pts = nlohmann::json::array();
    for (double x1 : {-0.4, -0.2, 0.0, 0.2, 0.4}) {
      Point x0{};
      x0[0] = x1;
      const auto e = expansion_at(pair, x0);
      worst = std::max(worst, e.transmission_defect);
      auto j = to_json(e);
      j["x1"] = x1;
      pts.push_back(j);
    }
    r.details = {{"sampled_explicit", to_json(sampled)}, {"solved", pts}, {"converged", pair.converged}};
    r.passed = pair.converged && worst <= 0.05 && regression;
    r.summary = acceptance::fmt("max |b1+b2| %.4f (max 0.05); explicit pair b = (%.4f, %.4f)", worst, sampled.b1,
                                sampled.b2);
  });
}

inline CriterionResult check_spectral(const AcceptanceOptions& = {}) {
  return acceptance::timed(9, "spectral half-cap", [&](CriterionResult& r) {
    const auto half = lambda1_cap({});
    bool monotone = true;
    double prev = std::numeric_limits<double>::infinity();
    nlohmann::json sweep = nlohmann::json::array();
    for (double frac : {0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75}) {
      CapProblem p;
      p.opening = frac * std::numbers::pi;
      const auto rep = lambda1_cap(p);
      monotone = monotone && rep.lambda1 < prev;
      prev = rep.lambda1;
      sweep.push_back({{"opening", p.opening}, {"lambda1", rep.lambda1}, {"gamma", rep.gamma}});
    }
    r.details = {{"half_cap", to_json(half)}, {"openings", sweep}};
    r.passed = std::abs(half.lambda1 - 0.75) <= 0.03 && std::abs(half.gamma - 0.5) <= 0.02 && monotone;
    r.summary = acceptance::fmt("lambda1 %.4f, gamma %.4f, strictly decreasing in opening: ", half.lambda1,
                                half.gamma) +
                (monotone ? "yes" : "no");
  });
}

inline CriterionResult check_flatness_improvement(const AcceptanceOptions& o = {}) {
  return acceptance::timed(10, "flatness improvement", [&](CriterionResult& r) {
    const auto g = acceptance::desk_grid(o.h);
    const int n = g.n();
    const double k = o.flat_curvature;
    const auto boundary = sample_boundary(g, {[=](const Point& p) { return kU(p[1] - k * p[0] * p[0], p[n]); },
                                              [=](const Point& p) { return kUbar(p[1] - k * p[0] * p[0], p[n]); }});
    const auto sol = solve_segregated(boundary);
    const auto fb = extract_free_boundary(sol.config);
    Point c = fb.points.front();
    for (const auto& p : fb.points)
      if (std::abs(p[0]) < std::abs(c[0])) c = p;
    Point en{};
    en[n - 1] = 1.0;
    const auto flat = measure_flatness(sol.config, en, 1.0, {c, 1.0});
    const double eps0 = flat.epsilon;
    const auto imp = improvement_check(sol.config, eps0, 0.25, c);
    const bool solver_ok = sol.converged && imp.epsilon_rescaled <= 0.6 * eps0 && eps0 >= 0.04 && eps0 <= 0.06;

    // Exact tilted, scaled pair: alpha U(x . nu).
    const double alpha = 1.02, angle = 0.02;
    Point nu{};
    nu[0] = std::sin(angle);
    nu[1] = std::cos(angle);
    Configuration tilted = make_configuration(
        {sample(g, [=](const Point& p) { return eval_pair_component(kU, p, n, nu, alpha); }),
         sample(g, [=](const Point& p) { return eval_pair_component(kUbar, p, n, nu, alpha); })});
    const auto tflat = measure_flatness(tilted, en, 1.0, {Point{}, 1.0});
    const auto timp = improvement_check(tilted, tflat.epsilon, 0.25, Point{});
    const bool exact_ok = timp.epsilon_out <= g.h();

    r.details = {{"solve", to_json(sol)},          {"center", point_json(c, 3)},
                 {"flatness", to_json(flat, n)},   {"improvement", to_json(imp, n)},
                 {"tilted_flatness", to_json(tflat, n)}, {"tilted_improvement", to_json(timp, n)}};
    r.passed = solver_ok && exact_ok;
    r.summary = acceptance::fmt("eps0 %.4f, rescaled eps_out %.4f (max %.4f)", eps0, imp.epsilon_rescaled,
                                0.6 * eps0) +
                acceptance::fmt("; tilted pair eps_out %.2e (max h = %.4f)", timp.epsilon_out, g.h());
  });
}

inline CriterionResult check_classification(const AcceptanceOptions& o = {}) {
  return acceptance::timed(11, "nodal classification", [&](CriterionResult& r) {
    const auto g = acceptance::desk_grid(o.h);
    const auto u = acceptance::exact_pair(g);
    const auto fb = extract_free_boundary(u);
    const double reach = default_classification_radii(g).back();
    std::vector<Point> cands;
    for (const auto& p : fb.points)
      if (g.contains_ball(p, reach)) cands.push_back(p);
    const auto cl = classify_nodal_points(u, cands);
    std::size_t regular = 0;
    double worst = 0.0;
    for (std::size_t j = 0; j < cl.labels.size(); ++j) {
      if (cl.labels[j] == NodalLabel::Regular) ++regular;
      worst = std::max(worst, cl.estimates[j]);
    }

    // Degree > 1/2 cross: first eigenfunction of two opposite quarter arcs,
    // paired with its quarter-turn rotation.
    const auto eig = lambda1_arcs({{0.0, 0.5 * std::numbers::pi}, {std::numbers::pi, 1.5 * std::numbers::pi}});
    const auto cross = sample_boundary(g, {[&](const Point& p) { return homogeneous_extension(eig, p); },
                                           [&](const Point& p) {
                                             Point q = p;
                                             q[0] = p[1];
                                             q[1] = -p[0];
                                             return homogeneous_extension(eig, q);
                                           }});
    const auto cc = classify_nodal_points(cross, {Point{}});
    const bool singular = cc.labels[0] == NodalLabel::Singular;
    r.details = {{"candidates", cands.size()}, {"regular", regular}, {"max_N0plus", worst},
                 {"cross_gamma", eig.gamma}, {"cross_N0plus", cc.estimates[0]}};
    r.passed = !cands.empty() && regular == cands.size() && singular;
    r.summary = acceptance::fmt("%.0f/%.0f interface points Regular (max N0+ %.4f)", static_cast<double>(regular),
                                static_cast<double>(cands.size()), worst) +
                acceptance::fmt("; cross N0+ %.4f -> ", cc.estimates[0]) + to_string(cc.labels[0]);
  });
}

/// CSV bytes of a small solve plus frequency report, for the determinism check.
inline std::string determinism_probe(double h) {
  const auto g = acceptance::desk_grid(h);
  const auto sol = solve_segregated(acceptance::exact_pair(g));
  const auto rep = frequency_N(sol.config, acceptance::origin(), {0.25, 0.375, 0.5});
  return energy_table(sol).str() + frequency_table(rep).str();
}

inline CriterionResult check_determinism(const AcceptanceOptions& = {}) {
  return acceptance::timed(12, "determinism", [&](CriterionResult& r) {
    const std::string a = determinism_probe(1.0 / 16), b = determinism_probe(1.0 / 16);
    r.details = {{"bytes", a.size()}};
    r.passed = !a.empty() && a == b;
    r.summary = acceptance::fmt("%.0f CSV bytes, identical: ", static_cast<double>(a.size())) + (a == b ? "yes" : "no");
  });
}

using CriterionCheck = CriterionResult (*)(const AcceptanceOptions&);

inline const std::vector<CriterionCheck>& acceptance_checks() {
  static const std::vector<CriterionCheck> all{
      check_frequency_constancy, check_frequency_monotonicity, check_log_derivative, check_pohozaev,
      check_reflection,          check_solver_recovery,        check_subsolution_decay,
      check_linearized_transmission, check_spectral,           check_flatness_improvement,
      check_classification,      check_determinism};
  return all;
}

inline std::string format_result_line(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "[%s] criterion %2d %-26s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  char tail[32];
  std::snprintf(tail, sizeof tail, " (%.1f s)", r.seconds);
  return std::string(head) + " " + r.summary + tail;
}

}  // namespace segfb
