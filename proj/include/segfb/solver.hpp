#pragma once

// Minimizers of the penalized functional J_beta and of the hard-constrained
// segregated energy, by red-black successive over-relaxation.
//
// Discrete energy on the stored half-grid:
//   D(u)   = 1/2 h^{n-1} sum_edges w_e (u_a - u_b)^2,  w_e = 2^{-#box faces containing the edge}
//   J_beta = sum_i D(u_i) + beta h^n sum_{trace nodes} sum_{i<j} u_i^2 u_j^2
// Local minimisation at a trace node reduces to a linear equation, so every
// node update is closed form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "segfb/errors.hpp"
#include "segfb/grid.hpp"
#include "segfb/interface.hpp"

namespace segfb {

/// Boundary data: only values on Dirichlet nodes (side walls, top) are read.
using BoundaryData = Configuration;

struct SolveConfig {
  double tolerance = 1e-10;  ///< relative energy decrease per sweep
  int max_sweeps = 50000;
  std::vector<double> beta_schedule;
  std::string projection_rule = "max";  ///< "max", or "energy" for max followed by support descent
  double relaxation = 0.0;  ///< SOR factor in (0, 2); <= 0 selects the optimal factor for the box
  int threads = 1;
};

struct ResidualReport {
  std::vector<double> sup_laplacian;  ///< one entry per component
  double exclusion = 0.0;             ///< distance kept from the free boundary
  std::size_t nodes_checked = 0;
};

struct SolveResult {
  Configuration config;
  double energy = 0.0;
  double segregation_defect = 0.0;
  int sweeps = 0;
  bool converged = false;
  bool support_cycle = false;  ///< supports oscillated and were frozen
  std::vector<double> energy_history;
  ResidualReport residuals;
};

inline void validate(const SolveConfig& cfg) {
  if (!(cfg.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (cfg.max_sweeps < 1) throw ConfigError("max_sweeps must be at least 1");
  if (cfg.projection_rule != "max" && cfg.projection_rule != "energy") throw ConfigError("unknown projection rule '" + cfg.projection_rule + "'");
  if (cfg.relaxation >= 2.0) throw ConfigError("relaxation factor must be below 2");
  if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
  double prev = 0.0;
  for (double b : cfg.beta_schedule) {
    if (!(b > prev)) throw ConfigError("beta schedule must be positive and strictly increasing");
    prev = b;
  }
}

/// Visits every node in storage order with its multi-index.
template <class Fn>
void for_each_node(const ExtensionGrid& g, const Fn& fn) {
  const int dim = g.dim();
  MultiIndex m{};
  for (std::size_t i = 0; i < g.size(); ++i) {
    fn(i, m);
    for (int a = dim - 1; a >= 0; --a) {
      if (++m[a] < g.count(a)) break;
      m[a] = 0;
    }
  }
}

/// Discrete Dirichlet energy D(f).
inline double dirichlet_energy(const ScalarField& f) {
  const auto& g = f.grid;
  const int dim = g.dim();
  double total = 0.0;
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    double face = 1.0;
    for (int b = 0; b < dim; ++b)
      if (m[b] == 0 || m[b] == g.count(b) - 1) face *= 0.5;
    for (int a = 0; a < dim; ++a) {
      if (m[a] + 1 >= g.count(a)) continue;
      double w = face;
      if (m[a] == 0) w *= 2.0;  // the edge's own axis does not count
      const double d = f[i + g.stride(a)] - f[i];
      total += w * d * d;
    }
  });
  return 0.5 * std::pow(g.h(), g.n() - 1) * total;
}

/// sum_{i<j} integral over the trace of u_i^2 u_j^2 (node rule, h^n per node).
inline double segregation_defect(const Configuration& u) {
  const auto& g = u.grid();
  const std::size_t step = static_cast<std::size_t>(g.count(g.n()));
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); i += step) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < u.k(); ++c) {
      const double v = u[c][i] * u[c][i];
      s += v;
      s2 += v * v;
    }
    total += 0.5 * (s * s - s2);
  }
  return total * std::pow(g.h(), g.n());
}

inline double total_energy(const Configuration& u, double beta) {
  double e = 0.0;
  for (const auto& f : u.components) e += dirichlet_energy(f);
  if (beta > 0.0) e += beta * segregation_defect(u);
  return e;
}

/// Tracks trace-support signatures to detect stability and periodic cycling.
class SupportHistory {
 public:
  enum class Status { Changed, Stable, Cycle };

  explicit SupportHistory(std::size_t depth = 8) : depth_(depth) {}

  Status observe(const std::vector<std::int8_t>& sig) {
    Status st = Status::Changed;
    if (!history_.empty() && history_.back() == sig) {
      ++stable_;
      st = Status::Stable;
    } else {
      stable_ = 0;
      for (std::size_t lag = 2; lag <= history_.size(); ++lag) {
        if (history_[history_.size() - lag] == sig) {
          ++cycles_;
          period_ = lag;
          st = Status::Cycle;
          break;
        }
      }
    }
    history_.push_back(sig);
    if (history_.size() > depth_) history_.pop_front();
    return st;
  }

  /// Consecutive repeats of the latest signature.
  int stable_count() const { return stable_; }
  int cycle_count() const { return cycles_; }

  /// Lexicographically smallest signature of the last detected cycle.
  std::vector<std::int8_t> smallest_in_cycle() const {
    if (history_.empty()) return {};
    const std::size_t p = std::min(period_ == 0 ? 1 : period_, history_.size());
    auto best = history_.back();
    for (std::size_t k = 1; k <= p; ++k) best = std::min(best, history_[history_.size() - k]);
    return best;
  }

 private:
  std::size_t depth_;
  std::deque<std::vector<std::int8_t>> history_;
  int stable_ = 0;
  int cycles_ = 0;
  std::size_t period_ = 0;
};

namespace detail {

enum class SweepMode { Independent, Penalized, Segregated };

struct SweepPlan {
  std::vector<std::size_t> nodes[2];  // free nodes by colour
  std::vector<std::uint8_t> trace[2];
  std::vector<std::size_t> trace_nodes;
  double omega = 1.0;
};

inline SweepPlan make_plan(const ExtensionGrid& g, double relaxation) {
  SweepPlan p;
  const int n = g.n();
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    if (m[n] == 0) p.trace_nodes.push_back(i);
    if (g.on_dirichlet_boundary(m)) return;
    int parity = 0;
    for (int a = 0; a <= n; ++a) parity += m[a];
    p.nodes[parity & 1].push_back(i);
    p.trace[parity & 1].push_back(m[n] == 0 ? 1 : 0);
  });
  if (relaxation > 0.0) {
    p.omega = relaxation;
  } else {
    int longest = 2 * (g.count(n) - 1);  // the mirror doubles the z extent
    for (int a = 0; a < n; ++a) longest = std::max(longest, g.count(a) - 1);
    p.omega = 2.0 / (1.0 + std::sin(std::numbers::pi / longest));
  }
  return p;
}

inline std::int8_t owner_at(const Configuration& u, std::size_t i, double theta) {
  for (std::size_t c = 0; c < u.k(); ++c)
    if (u[c][i] > theta) return static_cast<std::int8_t>(c);
  return -1;
}

inline std::vector<std::int8_t> support_signature(const Configuration& u, const SweepPlan& plan) {
  std::vector<std::int8_t> sig(plan.trace_nodes.size());
  for (std::size_t t = 0; t < sig.size(); ++t) sig[t] = owner_at(u, plan.trace_nodes[t], kSupportThreshold);
  return sig;
}

/// One red-black sweep. `frozen` (indexed by stored node / trace layer) fixes
/// trace ownership when non-empty.
inline void sweep(Configuration& u, const SweepPlan& plan, SweepMode mode, double beta,
                  const std::vector<std::int8_t>& frozen) {
  const auto& g = u.grid();
  const int n = g.n();
  const std::size_t k = u.k();
  const double omega = plan.omega;
  const double inv_int = 1.0 / (2.0 * (n + 1));
  const std::size_t zstep = g.stride(n);
  const std::size_t tstep = static_cast<std::size_t>(g.count(n));
  std::vector<double> lateral(k), up(k), m(k);

  auto relax = [omega](double old, double target) { return std::max(0.0, old + omega * (target - old)); };

  for (int colour = 0; colour < 2; ++colour) {
    const auto& nodes = plan.nodes[colour];
    const auto& trace = plan.trace[colour];
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const std::size_t i = nodes[q];
      if (!trace[q]) {
        for (std::size_t c = 0; c < k; ++c) {
          auto& f = u[c].values;
          double s = f[i + zstep] + f[i - zstep];
          for (int a = 0; a < n; ++a) s += f[i + g.stride(a)] + f[i - g.stride(a)];
          f[i] = relax(f[i], s * inv_int);
        }
        continue;
      }
      for (std::size_t c = 0; c < k; ++c) {
        const auto& f = u[c].values;
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += f[i + g.stride(a)] + f[i - g.stride(a)];
        lateral[c] = s;
        up[c] = f[i + zstep];
        m[c] = (s + 2.0 * up[c]) * inv_int;
      }
      switch (mode) {
        case SweepMode::Independent:
          for (std::size_t c = 0; c < k; ++c) u[c][i] = relax(u[c][i], m[c]);
          break;
        case SweepMode::Penalized: {
          const double coupling = 4.0 * beta * g.h();
          for (std::size_t c = 0; c < k; ++c) {
            double others = 0.0;
            for (std::size_t j = 0; j < k; ++j)
              if (j != c) others += u[j][i] * u[j][i];
            const double target = (lateral[c] + 2.0 * up[c]) / (2.0 * (n + 1) + coupling * others);
            u[c][i] = relax(u[c][i], target);
          }
          break;
        }
        case SweepMode::Segregated: {
          int owner = -1;
          if (!frozen.empty()) {
            owner = frozen[i / tstep];
          } else {
            double best = 0.0;
            bool tie = false;
            for (std::size_t c = 0; c < k; ++c) {
              if (m[c] > best) {
                best = m[c];
                owner = static_cast<int>(c);
                tie = false;
              } else if (m[c] == best && best > 0.0) {
                tie = true;
              }
            }
            // An exact tie leaves the current state alone: an owned node stays
            // with its owner, an empty node stays empty.
            if (tie) {
              const int current = owner_at(u, i, 0.0);
              owner = current;
              if (current >= 0 && m[current] != best) owner = -1;
            }
          }
          for (std::size_t c = 0; c < k; ++c) {
            if (static_cast<int>(c) != owner) {
              u[c][i] = 0.0;
            } else if (u[c][i] > 0.0) {
              u[c][i] = relax(u[c][i], m[c]);
            } else {
              u[c][i] = std::max(0.0, m[c]);
            }
          }
          break;
        }
      }
    }
  }
}

/// At each trace node keep only the largest component (lowest index on ties).
inline void project_max(Configuration& u, const SweepPlan& plan) {
  for (std::size_t i : plan.trace_nodes) {
    std::size_t best = 0;
    bool tie = false;
    for (std::size_t c = 1; c < u.k(); ++c) {
      if (u[c][i] > u[best][i]) {
        best = c;
        tie = false;
      } else if (u[c][i] == u[best][i]) {
        tie = true;
      }
    }
    for (std::size_t c = 0; c < u.k(); ++c)
      if (c != best || tie) u[c][i] = 0.0;
  }
}

inline void check_boundary(const BoundaryData& b) {
  if (b.k() == 0) throw PreconditionError("boundary data has no components");
  const auto& g = b.grid();
  for (const auto& f : b.components)
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!std::isfinite(f[i])) throw PreconditionError("boundary data is not finite");
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    if (!g.on_dirichlet_boundary(m)) return;
    int positive = 0;
    for (const auto& f : b.components) {
      if (f[i] < 0.0) throw PreconditionError("boundary data must be nonnegative");
      if (f[i] > 0.0) ++positive;
    }
    if (m[g.n()] == 0 && positive > 1) throw PreconditionError("boundary data not segregated on the trace boundary");
  });
}

/// Boundary values kept, free nodes zeroed.
inline Configuration initial_from_boundary(const BoundaryData& b, ConfigurationMode mode, double beta) {
  Configuration u = b;
  u.mode = mode;
  u.beta = beta;
  const auto& g = u.grid();
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    if (g.on_dirichlet_boundary(m)) return;
    for (auto& f : u.components) f[i] = 0.0;
  });
  return u;
}

struct RunOutcome {
  int sweeps = 0;
  bool converged = false;
  bool cycle = false;
  std::vector<double> history;
};

inline RunOutcome run(Configuration& u, const SweepPlan& plan, SweepMode mode, double beta, const SolveConfig& cfg,
                      std::vector<std::int8_t> frozen = {}) {
  RunOutcome out;
  double prev = total_energy(u, mode == SweepMode::Penalized ? beta : 0.0);
  out.history.push_back(prev);
  SupportHistory supports;
  if (mode == SweepMode::Segregated) supports.observe(support_signature(u, plan));
  for (int s = 1; s <= cfg.max_sweeps; ++s) {
    sweep(u, plan, mode, beta, frozen);
    const double e = total_energy(u, mode == SweepMode::Penalized ? beta : 0.0);
    out.history.push_back(e);
    out.sweeps = s;
    const bool small = prev - e <= cfg.tolerance * std::max(std::abs(e), std::numeric_limits<double>::min());
    prev = e;
    bool stable = true;
    if (mode == SweepMode::Segregated && frozen.empty()) {
      const auto st = supports.observe(support_signature(u, plan));
      stable = supports.stable_count() >= 2;
      if (st == SupportHistory::Status::Cycle && supports.cycle_count() >= 3) {
        const auto best = supports.smallest_in_cycle();
        const auto& g = u.grid();
        frozen.assign(g.size() / static_cast<std::size_t>(g.count(g.n())), -1);
        for (std::size_t t = 0; t < best.size(); ++t) frozen[t] = best[t];
        out.cycle = true;
      }
    }
    if (small && stable) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace detail

namespace detail {

/// Harmonic start for the coupled solvers; an unconverged start is left to
/// the main iteration, which flags its own convergence.
inline Configuration harmonic_start(const BoundaryData& boundary, const SolveConfig& cfg, bool* converged = nullptr) {
  Configuration u = initial_from_boundary(boundary, ConfigurationMode::Penalized, 0.0);
  const auto plan = make_plan(u.grid(), cfg.relaxation);
  const auto out = run(u, plan, SweepMode::Independent, 0.0, cfg);
  if (converged) *converged = out.converged;
  return u;
}

}  // namespace detail

/// Componentwise discrete harmonic extension (even in z, no interaction).
inline Configuration harmonic_extension(const BoundaryData& boundary, const SolveConfig& cfg = {}) {
  validate(cfg);
  bool converged = false;
  auto u = detail::harmonic_start(boundary, cfg, &converged);
  if (!converged) throw ConvergenceError("harmonic extension did not converge");
  return u;
}

/// Per-component sup |Delta_h u_i| over free nodes, skipping trace nodes in the
/// zero set of u_i and nodes closer than `exclusion` to the free boundary
/// (default 2h).
inline ResidualReport residual_report(const Configuration& u, double exclusion = -1.0) {
  const auto& g = u.grid();
  const int n = g.n();
  ResidualReport rep;
  rep.exclusion = exclusion < 0.0 ? 2.0 * g.h() : exclusion;
  rep.sup_laplacian.assign(u.k(), 0.0);
  std::optional<InterfacePointSet> fb;
  if (u.k() == 2) {
    try {
      fb = extract_free_boundary(u);
    } catch (const PreconditionError&) {
      fb.reset();
    }
  }
  for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
    if (g.on_dirichlet_boundary(m)) return;
    const Point x = g.coords(m);
    if (fb && x[n] < rep.exclusion && distance_to_interface(*fb, x) < rep.exclusion) return;
    ++rep.nodes_checked;
    for (std::size_t c = 0; c < u.k(); ++c) {
      if (m[n] == 0 && u[c][i] <= kSupportThreshold) continue;
      rep.sup_laplacian[c] = std::max(rep.sup_laplacian[c], std::abs(discrete_laplacian(u[c], m)));
    }
  });
  return rep;
}

namespace detail {

inline SolveResult finish(Configuration u, RunOutcome out, double beta) {
  SolveResult r;
  r.energy = out.history.back();
  r.segregation_defect = segregation_defect(u);
  r.sweeps = out.sweeps;
  r.converged = out.converged;
  r.support_cycle = out.cycle;
  r.energy_history = std::move(out.history);
  r.config = std::move(u);
  r.config.beta = beta;
  r.residuals = residual_report(r.config);
  return r;
}

}  // namespace detail

/// Minimizer of J_beta for one beta, started from `initial` when given (its
/// Dirichlet values are replaced by the boundary data) or from the harmonic
/// extension otherwise.
inline SolveResult solve_penalized(const BoundaryData& boundary, double beta, const SolveConfig& cfg = {},
                                   const Configuration* initial = nullptr) {
  validate(cfg);
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  detail::check_boundary(boundary);
  Configuration u;
  if (initial) {
    if (initial->k() != boundary.k() || !(initial->grid() == boundary.grid()))
      throw PreconditionError("warm start does not match the boundary data");
    u = *initial;
    const auto& g = u.grid();
    for_each_node(g, [&](std::size_t i, const MultiIndex& m) {
      if (!g.on_dirichlet_boundary(m)) return;
      for (std::size_t c = 0; c < u.k(); ++c) u[c][i] = boundary[c][i];
    });
  } else {
    u = detail::harmonic_start(boundary, cfg);
  }
  u.mode = ConfigurationMode::Penalized;
  const auto plan = detail::make_plan(u.grid(), cfg.relaxation);
  auto out = detail::run(u, plan, detail::SweepMode::Penalized, beta, cfg);
  return detail::finish(std::move(u), std::move(out), beta);
}

/// Solves along cfg.beta_schedule, warm-starting each beta from the previous one.
inline std::vector<SolveResult> solve_penalized_schedule(const BoundaryData& boundary, const SolveConfig& cfg) {
  validate(cfg);
  if (cfg.beta_schedule.empty()) throw ConfigError("beta schedule is empty");
  std::vector<SolveResult> results;
  for (double beta : cfg.beta_schedule) {
    const Configuration* warm = results.empty() ? nullptr : &results.back().config;
    results.push_back(solve_penalized(boundary, beta, cfg, warm));
  }
  return results;
}

namespace detail {

inline constexpr int kDescentRounds = 64;

/// Moves trace ownership wherever that lowers the segregated energy. Moves
/// hand a whole layer of a support front to the neighbouring owner, then
/// single nodes. A flip changes the energy far from the moved nodes, so each
/// trial is a warm-started global relaxation with the supports fixed.
inline void descend_supports(Configuration& u, const SweepPlan& plan, const SolveConfig& cfg, RunOutcome& out) {
  const ExtensionGrid g = u.grid();  // u is reassigned below
  const int n = g.n();
  const std::size_t tstep = static_cast<std::size_t>(g.count(n));
  std::vector<std::int8_t> owners(g.size() / tstep);
  for (std::size_t t = 0; t < owners.size(); ++t) owners[t] = owner_at(u, t * tstep, kSupportThreshold);
  double energy = out.history.back();

  // Owners of the trace neighbours of node t that differ from its own.
  auto rivals = [&](std::size_t t) {
    std::vector<std::int8_t> r;
    const std::size_t i = t * tstep;
    if (g.on_dirichlet_boundary(g.multi_index(i))) return r;
    for (int a = 0; a < n; ++a)
      for (int d : {-1, 1}) {
        const std::size_t j = i + d * static_cast<std::ptrdiff_t>(g.stride(a));
        if (owners[j / tstep] != owners[t]) r.push_back(owners[j / tstep]);
      }
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    return r;
  };

  // Applies the move, keeps it when the relaxed energy drops.
  auto attempt = [&](const std::vector<std::pair<std::size_t, std::int8_t>>& move) {
    if (move.empty()) return false;
    const auto saved = owners;
    Configuration trial = u;
    for (const auto& [t, c] : move) {
      owners[t] = c;
      for (std::size_t k = 0; k < trial.k(); ++k)
        if (static_cast<int>(k) != c) trial[k][t * tstep] = 0.0;
    }
    auto step = run(trial, plan, SweepMode::Segregated, 0.0, cfg, owners);
    if (!(step.history.back() < energy * (1.0 - cfg.tolerance))) {
      owners = saved;
      return false;
    }
    u = std::move(trial);
    energy = step.history.back();
    out.sweeps += step.sweeps;
    out.converged = step.converged;
    // The trial starts from a perturbed state, so only its relaxed energy is recorded.
    out.history.push_back(energy);
    return true;
  };

  for (int round = 0; round < kDescentRounds; ++round) {
    int accepted = 0;
    for (int from = -1; from < static_cast<int>(u.k()); ++from)
      for (int to = -1; to < static_cast<int>(u.k()); ++to) {
        if (from == to) continue;
        std::vector<std::pair<std::size_t, std::int8_t>> layer;
        for (std::size_t t = 0; t < owners.size(); ++t) {
          if (owners[t] != from) continue;
          const auto r = rivals(t);
          if (std::find(r.begin(), r.end(), to) != r.end()) layer.emplace_back(t, static_cast<std::int8_t>(to));
        }
        if (layer.size() > 1 && attempt(layer)) ++accepted;
      }
    for (std::size_t t = 0; t < owners.size(); ++t)
      for (std::int8_t c : rivals(t))
        if (attempt({{t, c}})) {
          ++accepted;
          break;
        }
    if (accepted == 0) break;
  }
}

}  // namespace detail

/// Segregated minimizer: harmonic start, one projection, then sweeps in which
/// each trace node goes to the component with the largest harmonic
/// replacement value. The "energy" rule then moves single trace nodes between
/// supports while that lowers the energy.
inline SolveResult solve_segregated(const BoundaryData& boundary, const SolveConfig& cfg = {}) {
  validate(cfg);
  detail::check_boundary(boundary);
  Configuration u = detail::harmonic_start(boundary, cfg);
  u.mode = ConfigurationMode::Segregated;
  const auto plan = detail::make_plan(u.grid(), cfg.relaxation);
  detail::project_max(u, plan);
  auto out = detail::run(u, plan, detail::SweepMode::Segregated, 0.0, cfg);
  if (cfg.projection_rule == "energy") detail::descend_supports(u, plan, cfg, out);
  return detail::finish(std::move(u), std::move(out), 0.0);
}

/// Boundary data sampled from callables, one per component; values on every
/// node (only Dirichlet nodes matter to the solvers).
inline BoundaryData sample_boundary(const ExtensionGrid& g, const std::vector<std::function<double(const Point&)>>& fns) {
  std::vector<ScalarField> comps;
  for (const auto& fn : fns) comps.push_back(sample(g, fn));
  return make_configuration(std::move(comps));
}

}  // namespace segfb
