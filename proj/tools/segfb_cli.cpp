// Experiment runner: one JSON config per invocation, reports written to an
// output directory together with a manifest.
//
// Exit status: 0 success, 1 failed acceptance criteria or internal error,
// 2 configuration error, 3 numeric non-convergence, 4 precondition violation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "segfb/segfb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace segfb;

namespace {

const std::vector<std::string> kCommands{"solve",     "frequency", "blowup",   "classify",
                                         "linearize", "flatness",  "spectral", "verify-all"};

// ---------------------------------------------------------------------------
// Config access with unknown-key rejection

class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  T get(const std::string& key, const T& fallback) {
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "." + key + " has the wrong type");
    }
  }

  template <class T>
  T require(const std::string& key) {
    if (!has(key)) throw ConfigError(where() + "." + key + " is required");
    return get<T>(key, T{});
  }

  Section sub(const std::string& key) {
    static const json empty = json::object();
    if (!has(key)) return Section(empty, path_ + "." + key);
    return Section(j_.at(key), path_ + "." + key);
  }

  /// Rejects keys that were never queried.
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key " + where() + "." + k);
  }

 private:
  std::string where() const { return path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Point to_point(const std::vector<double>& v, int dim, const std::string& what) {
  if (static_cast<int>(v.size()) != dim) throw ConfigError(what + " needs " + std::to_string(dim) + " coordinates");
  Point p{};
  for (int a = 0; a < dim; ++a) p[a] = v[a];
  return p;
}

// ---------------------------------------------------------------------------
// Parsed experiment

struct GridSpec {
  int n = 2;
  double half_width = 1.0;
  double zmax = 1.0;
  double h = 1.0 / 32;
};

struct BoundarySpec {
  std::string profile = "pair";  // pair | subsolution | files
  std::vector<double> amplitudes{1.0, 1.0};
  double angle = 0.0;      // rotation of e_n towards e_1 (n = 2)
  double shift = 0.0;      // t = x . nu + shift - curvature |x'|^2
  double curvature = 0.0;
  double R = 10.0;
  double beta = 0.0;
  std::vector<std::string> files;
};

struct Experiment {
  std::string command;
  GridSpec grid;
  BoundarySpec boundary;
  SolveConfig solver;
  bool use_solver = false;  // analysis commands act on the solver output when set
  std::uint64_t seed = 0;
  json section = json::object();  // command-specific parameters, validated below
  json echo;                      // the config as read
};

GridSpec parse_grid(Section s, std::optional<double> h_override) {
  GridSpec g;
  g.n = s.get<int>("n", g.n);
  g.half_width = s.get<double>("half_width", g.half_width);
  g.zmax = s.get<double>("zmax", g.zmax);
  g.h = s.get<double>("h", g.h);
  s.finish();
  if (h_override) g.h = *h_override;
  if (g.n < 1 || g.n > 2) throw ConfigError("grid.n must be 1 or 2");
  if (!(g.half_width > 0.0) || !(g.zmax > 0.0) || !(g.h > 0.0)) throw ConfigError("grid extents and h must be positive");
  const double cells = g.half_width / g.h;
  if (std::abs(cells - std::round(cells)) > 1e-9 || std::abs(g.zmax / g.h - std::round(g.zmax / g.h)) > 1e-9)
    throw ConfigError("grid extents must be multiples of h");
  return g;
}

BoundarySpec parse_boundary(Section s, const fs::path& base) {
  BoundarySpec b;
  b.profile = s.get<std::string>("profile", b.profile);
  if (b.profile == "pair") {
    b.amplitudes = s.get<std::vector<double>>("amplitudes", b.amplitudes);
    b.angle = s.get<double>("angle", b.angle);
    b.shift = s.get<double>("shift", b.shift);
    b.curvature = s.get<double>("curvature", b.curvature);
    if (b.amplitudes.size() != 2) throw ConfigError("boundary.amplitudes needs two entries");
    for (double a : b.amplitudes)
      if (!(a > 0.0)) throw ConfigError("boundary amplitudes must be positive");
  } else if (b.profile == "subsolution") {
    b.R = s.get<double>("R", b.R);
    b.beta = s.get<double>("beta", b.beta);
    if (!(b.R >= kDefaultRMin)) throw ConfigError("boundary.R must be at least " + std::to_string(kDefaultRMin));
    if (b.beta < 0.0) throw ConfigError("boundary.beta must be nonnegative");
  } else if (b.profile == "files") {
    for (const auto& f : s.require<std::vector<std::string>>("files")) {
      const fs::path p = fs::path(f).is_absolute() ? fs::path(f) : base / f;
      if (!fs::is_regular_file(p)) throw ConfigError("field file not found: " + p.string());
      b.files.push_back(fs::absolute(p).string());
    }
    if (b.files.size() < 2) throw ConfigError("boundary.files needs at least two fields");
  } else {
    throw ConfigError("unknown boundary profile '" + b.profile + "'");
  }
  s.finish();
  return b;
}

SolveConfig parse_solver(Section s) {
  SolveConfig c;
  c.tolerance = s.get<double>("tolerance", c.tolerance);
  c.max_sweeps = s.get<int>("max_sweeps", c.max_sweeps);
  c.beta_schedule = s.get<std::vector<double>>("beta_schedule", c.beta_schedule);
  c.projection_rule = s.get<std::string>("projection_rule", c.projection_rule);
  c.relaxation = s.get<double>("relaxation", c.relaxation);
  s.finish();
  return c;
}

/// Keys allowed in each command section; values are checked when used.
const std::map<std::string, std::set<std::string>>& command_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"solve", {"mode", "save_fields"}},
      {"frequency", {"center", "radii"}},
      {"blowup", {"center", "t", "h_out"}},
      {"classify", {"delta"}},
      {"linearize", {"data", "value", "points", "tube"}},
      {"flatness", {"center", "radius", "epsilon", "rho", "graph_radius", "oscillation_radius"}},
      {"spectral", {"openings", "azimuth_cells"}},
      {"verify-all", {"h", "h_solver", "flat_curvature", "criteria"}}};
  return keys;
}

Experiment parse_config(const fs::path& path, const std::string& cli_command, std::optional<double> h_override,
                        int threads) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  Experiment ex;
  ex.echo = j;
  Section root(j, "config");
  ex.command = root.get<std::string>("command", cli_command);
  if (ex.command != cli_command) throw ConfigError("config command '" + ex.command + "' differs from '" + cli_command + "'");
  ex.grid = parse_grid(root.sub("grid"), h_override);
  ex.boundary = parse_boundary(root.sub("boundary"), path.parent_path());
  if (ex.boundary.profile == "files" && h_override) throw ConfigError("--h cannot override a grid read from files");
  ex.solver = parse_solver(root.sub("solver"));
  ex.solver.threads = threads;
  validate(ex.solver);
  ex.use_solver = root.get<bool>("use_solver", false);
  ex.seed = root.get<std::uint64_t>("seed", 0);
  if (root.has(ex.command)) {
    ex.section = j.at(ex.command);
    if (!ex.section.is_object()) throw ConfigError("config." + ex.command + " must be an object");
    const auto& allowed = command_keys().at(ex.command);
    for (const auto& [k, v] : ex.section.items())
      if (!allowed.count(k)) throw ConfigError("unknown key config." + ex.command + "." + k);
  }
  root.finish();
  return ex;
}

// ---------------------------------------------------------------------------
// Data

ExtensionGrid make_grid(const GridSpec& s) { return ExtensionGrid::box(s.n, s.half_width, s.zmax, s.h); }

Configuration make_boundary(const Experiment& ex) {
  const auto& b = ex.boundary;
  if (b.profile == "files") {
    std::vector<ScalarField> comps;
    for (const auto& f : b.files) comps.push_back(load_field(f));
    for (const auto& c : comps)
      if (!(c.grid == comps.front().grid)) throw ConfigError("field files live on different grids");
    return make_configuration(std::move(comps));
  }
  const auto g = make_grid(ex.grid);
  const int n = g.n();
  if (b.profile == "subsolution") {
    if (n != 2 && n != 1) throw ConfigError("subsolution data needs n = 1 or 2");
    const SubsolutionParams sp{b.R, b.beta, n};
    return sample_boundary(g, {[=](const Point& p) { return eval_subsolution(sp, 1, p); },
                               [=](const Point& p) { return eval_subsolution(sp, 2, p); }});
  }
  if (n == 1 && b.angle != 0.0) throw ConfigError("boundary.angle needs n = 2");
  Point nu{};
  nu[n - 1] = std::cos(b.angle);
  if (n == 2) nu[0] = std::sin(b.angle);
  auto t_of = [=](const Point& p) {
    double t = b.shift;
    for (int a = 0; a < n; ++a) t += p[a] * nu[a];
    for (int a = 0; a + 1 < n; ++a) t -= b.curvature * p[a] * p[a];
    return t;
  };
  const double a1 = b.amplitudes[0], a2 = b.amplitudes[1];
  return sample_boundary(g, {[=](const Point& p) { return a1 * kU(t_of(p), p[n]); },
                             [=](const Point& p) { return a2 * kUbar(t_of(p), p[n]); }});
}

// ---------------------------------------------------------------------------
// Outputs are collected in memory and written only after the run succeeds.

struct Outputs {
  std::map<std::string, std::string> files;
  json summary = json::object();
  int status = 0;

  void csv(const std::string& name, const CsvTable& t) { files[name] = t.str(); }
  void add_json(const std::string& name, const json& j) { files[name] = j.dump(2) + "\n"; }
};

template <class T>
T param(const Experiment& ex, const std::string& key, const T& fallback) {
  if (!ex.section.contains(key)) return fallback;
  try {
    return ex.section.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config." + ex.command + "." + key + " has the wrong type");
  }
}

Point param_point(const Experiment& ex, const std::string& key, int dim) {
  if (!ex.section.contains(key)) return Point{};
  return to_point(param<std::vector<double>>(ex, key, {}), dim, "config." + ex.command + "." + key);
}

/// Analysed configuration: the sampled data, or the solver output if requested.
Configuration analysed(const Experiment& ex, Outputs& out) {
  auto data = make_boundary(ex);
  if (!ex.use_solver) return data;
  auto sol = solve_segregated(data, ex.solver);
  out.summary["solve"] = to_json(sol);
  out.csv("energy.csv", energy_table(sol));
  if (!sol.converged) out.status = 3;
  return std::move(sol.config);
}

void run_solve(const Experiment& ex, Outputs& out) {
  const auto mode = param<std::string>(ex, "mode", "segregated");
  const bool save = param<bool>(ex, "save_fields", false);
  const auto data = make_boundary(ex);
  SolveResult sol;
  if (mode == "segregated") {
    sol = solve_segregated(data, ex.solver);
  } else if (mode == "penalized") {
    if (ex.solver.beta_schedule.empty()) throw ConfigError("penalized mode needs solver.beta_schedule");
    auto all = solve_penalized_schedule(data, ex.solver);
    json stages = json::array();
    for (const auto& s : all) stages.push_back(to_json(s));
    out.summary["stages"] = stages;
    sol = std::move(all.back());
  } else {
    throw ConfigError("config.solve.mode must be 'segregated' or 'penalized'");
  }
  out.summary["solve"] = to_json(sol);
  out.csv("energy.csv", energy_table(sol));
  if (mode == "segregated") {
    try {
      out.csv("interface.csv", interface_table(extract_free_boundary(sol.config)));
    } catch (const PreconditionError&) {
      out.summary["interface"] = "empty";
    }
  }
  if (save)
    for (std::size_t c = 0; c < sol.config.k(); ++c) {
      std::ostringstream os;
      write_field(os, sol.config[c]);
      out.files["u" + std::to_string(c + 1) + ".sfld"] = os.str();
    }
  if (!sol.converged) out.status = 3;
}

void run_frequency(const Experiment& ex, Outputs& out) {
  const auto u = analysed(ex, out);
  const int dim = u.grid().dim();
  const auto rep = frequency_N(u, param_point(ex, "center", dim),
                               param<std::vector<double>>(ex, "radii", {0.1, 0.2, 0.3, 0.4, 0.5}));
  out.csv("frequency.csv", frequency_table(rep));
  auto j = to_json(rep, dim);
  if (rep.radii.size() >= 3) j["logderivative_defect"] = check_logderivative(rep);
  out.summary["frequency"] = j;
}

void run_blowup(const Experiment& ex, Outputs& out) {
  const auto u = analysed(ex, out);
  const int dim = u.grid().dim();
  const auto v = rescale(u, param_point(ex, "center", dim), param<double>(ex, "t", 0.5), param<double>(ex, "h_out", 0.0));
  const auto fit = fit_half_plane_pair(v);
  out.summary["blowup"] = to_json(fit, u.grid().n());
}

void run_classify(const Experiment& ex, Outputs& out) {
  const auto u = analysed(ex, out);
  const auto& g = u.grid();
  const double delta = param<double>(ex, "delta", kDefaultSingularDelta);
  const auto fb = extract_free_boundary(u);
  const double reach = default_classification_radii(g).back();
  std::vector<Point> cands;
  for (const auto& p : fb.points)
    if (g.contains_ball(p, reach)) cands.push_back(p);
  if (cands.empty()) throw PreconditionError("no interface point far enough from the box walls");
  const auto cl = classify_nodal_points(u, cands, delta);
  out.csv("classification.csv", classification_table(cl, g.n()));
  std::size_t regular = 0;
  for (auto l : cl.labels) regular += l == NodalLabel::Regular;
  out.summary["classification"] = {{"points", cl.labels.size()}, {"regular", regular}, {"delta", delta}};
}

void run_linearize(const Experiment& ex, Outputs& out) {
  const auto g = make_grid(ex.grid);
  const int n = g.n();
  const auto data = param<std::string>(ex, "data", "explicit");
  ScalarField h1(g), h2(g);
  if (data == "explicit") {
    h1 = sample(g, [n](const Point& p) { return explicit_minimizer(p, n)[0]; });
    h2 = sample(g, [n](const Point& p) { return explicit_minimizer(p, n)[1]; });
  } else if (data == "constant") {
    const double c = param<double>(ex, "value", 1.0);
    h1 = h2 = sample(g, [c](const Point&) { return c; });
  } else if (data == "tangential") {
    if (n < 2) throw ConfigError("tangential linearized data needs n = 2");
    h1 = h2 = sample(g, [](const Point& p) { return p[0]; });
  } else {
    throw ConfigError("config.linearize.data must be 'explicit', 'constant' or 'tangential'");
  }
  LinearizedConfig cfg;
  cfg.tolerance = std::min(1e-12, ex.solver.tolerance);
  cfg.max_sweeps = std::max(200000, ex.solver.max_sweeps);
  const auto pair = solve_linearized(h1, h2, cfg);
  const double tube = param<double>(ex, "tube", kExpansionTube);
  std::vector<Point> where;
  std::vector<ExpansionCoefficients> coef;
  for (double x1 : param<std::vector<double>>(ex, "points", {-0.4, -0.2, 0.0, 0.2, 0.4})) {
    Point p{};
    if (n == 2) p[0] = x1;
    else if (x1 != 0.0) throw ConfigError("linearize points need n = 2 unless 0");
    where.push_back(p);
    coef.push_back(expansion_at(pair, p, tube));
  }
  out.csv("expansion.csv", expansion_table(where, coef, n));
  const auto res = weighted_harmonic_residual(pair);
  out.summary["linearize"] = {{"energy", pair.energy},     {"sweeps", pair.sweeps},
                              {"converged", pair.converged}, {"residual_g1", res.g1},
                              {"residual_g2", res.g2}};
  if (!pair.converged) out.status = 3;
}

void run_flatness(const Experiment& ex, Outputs& out) {
  const auto u = analysed(ex, out);
  const auto& g = u.grid();
  const int n = g.n();
  Point center{};
  if (ex.section.contains("center")) {
    center = param_point(ex, "center", g.dim());
  } else {
    // Interface point nearest the trace origin in x'.
    const auto fb = extract_free_boundary(u);
    center = fb.points.front();
    for (const auto& p : fb.points)
      if (std::abs(p[0]) < std::abs(center[0])) center = p;
    if (n == 1) center = fb.points.front();
  }
  Point en{};
  en[n - 1] = 1.0;
  const double radius = param<double>(ex, "radius", 1.0);
  const auto flat = measure_flatness(u, en, 1.0, {center, radius});
  json j{{"flatness", to_json(flat, n)}};
  const double eps = param<double>(ex, "epsilon", flat.epsilon);
  if (eps > 0.0 && eps <= kDefaultEpsilonBar) {
    const auto imp = improvement_check(u, eps, param<double>(ex, "rho", 0.25), center);
    j["improvement"] = to_json(imp, n);
    const auto osc = harnack_oscillation(u, eps, center, param<double>(ex, "oscillation_radius", 0.5));
    out.csv("oscillation.csv", oscillation_table(osc));
    j["decay_factor"] = osc.decay_factor;
  } else {
    j["improvement"] = "skipped: epsilon outside (0, eps_bar]";
  }
  if (n == 2) {
    try {
      j["graph"] = to_json(fit_interface_graph(extract_free_boundary(u), center, param<double>(ex, "graph_radius", 0.5)));
    } catch (const PreconditionError& e) {
      j["graph"] = std::string("skipped: ") + e.what();
    }
  }
  out.summary["flatness"] = j;
}

void run_spectral(const Experiment& ex, Outputs& out) {
  CsvTable t({"opening", "lambda1", "gamma"});
  json all = json::array();
  const int cells = param<int>(ex, "azimuth_cells", SphereGridOptions{}.azimuth_cells);
  for (double th : param<std::vector<double>>(ex, "openings", {std::numbers::pi / 4, std::numbers::pi / 2,
                                                               3 * std::numbers::pi / 4})) {
    CapProblem p;
    p.opening = th;
    p.grid.azimuth_cells = cells;
    const auto rep = lambda1_cap(p);
    t.add_row({th, rep.lambda1, rep.gamma});
    auto j = to_json(rep);
    j["opening"] = th;
    all.push_back(j);
  }
  out.csv("spectral.csv", t);
  out.summary["spectral"] = all;
}

void run_verify_all(const Experiment& ex, Outputs& out) {
  AcceptanceOptions opt;
  opt.h = param<double>(ex, "h", opt.h);
  opt.h_solver = param<double>(ex, "h_solver", opt.h_solver);
  opt.flat_curvature = param<double>(ex, "flat_curvature", opt.flat_curvature);
  auto ids = param<std::vector<int>>(ex, "criteria", {});
  const auto& checks = acceptance_checks();
  if (ids.empty())
    for (int i = 1; i <= static_cast<int>(checks.size()); ++i) ids.push_back(i);
  for (int id : ids)
    if (id < 1 || id > static_cast<int>(checks.size())) throw ConfigError("unknown acceptance criterion " + std::to_string(id));
  CsvTable t({"criterion", "name", "passed"});
  json all = json::array();
  bool ok = true;
  for (int id : ids) {
    const auto r = checks[id - 1](opt);
    std::cout << format_result_line(r) << std::endl;
    t.add_row(std::vector<std::string>{std::to_string(r.id), r.name, r.passed ? "1" : "0"});
    all.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"summary", r.summary},
                   {"details", r.details}, {"seconds", r.seconds}});
    ok = ok && r.passed;
  }
  out.csv("acceptance.csv", t);
  out.summary["criteria"] = all;
  if (!ok) out.status = 1;
}

void dispatch(const Experiment& ex, Outputs& out) {
  if (ex.command == "solve") return run_solve(ex, out);
  if (ex.command == "frequency") return run_frequency(ex, out);
  if (ex.command == "blowup") return run_blowup(ex, out);
  if (ex.command == "classify") return run_classify(ex, out);
  if (ex.command == "linearize") return run_linearize(ex, out);
  if (ex.command == "flatness") return run_flatness(ex, out);
  if (ex.command == "spectral") return run_spectral(ex, out);
  return run_verify_all(ex, out);
}

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("SEGFB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw ConfigError("SEGFB_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segregated free-boundary laboratory"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print this help");  // --h is the spacing override
  std::string config_path, out_dir = "segfb_out";
  int threads_flag = 0;
  std::optional<double> h_flag;
  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads_flag, "worker threads (SEGFB_THREADS if absent)")->check(CLI::PositiveNumber);
    sub->add_option("--h", h_flag, "grid spacing override");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  Experiment ex;
  Outputs out;
  try {
    ex = parse_config(config_path, command, h_flag, resolve_threads(threads_flag));
    if (fs::exists(out_dir) && !fs::is_directory(out_dir)) throw ConfigError("--out exists and is not a directory");
    dispatch(ex, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return 3;
  } catch (const PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  try {
    fs::create_directories(out_dir);
    std::vector<std::string> names;
    for (const auto& [name, text] : out.files) {
      write_text((fs::path(out_dir) / name).string(), text);
      names.push_back(name);
    }
    write_json((fs::path(out_dir) / "summary.json").string(), out.summary);
    names.push_back("summary.json");
    const json manifest{{"command", ex.command},
                        {"config", ex.echo},
                        {"config_path", fs::absolute(config_path).string()},
                        {"version", SEGFB_VERSION},
                        {"threads", ex.solver.threads},
                        {"h", ex.grid.h},
                        {"seed", ex.seed},
                        {"wall_seconds", seconds},
                        {"outputs", names},
                        {"exit_status", out.status}};
    write_json((fs::path(out_dir) / "manifest.json").string(), manifest);
  } catch (const std::exception& e) {
    std::cerr << "error writing outputs: " << e.what() << "\n";
    return 2;
  }
  return out.status;
}
