#pragma once

// CSV tables and JSON conversions for reports. Numbers are printed with a
// fixed format so identical results give identical bytes.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfb/almgren.hpp"
#include "segfb/blowup.hpp"
#include "segfb/errors.hpp"
#include "segfb/flatness.hpp"
#include "segfb/linearized.hpp"
#include "segfb/solver.hpp"
#include "segfb/spectral.hpp"

namespace segfb {

/// Round-trip-safe decimal form ("%.17g").
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw PreconditionError("CSV row width differs from the header");
    rows_.push_back(std::move(cells));
  }
  void add_row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_number(v));
    add_row(std::move(cells));
  }

  std::size_t rows() const { return rows_.size(); }

  std::string str() const {
    std::ostringstream os;
    write_line(os, header_);
    for (const auto& r : rows_) write_line(os, r);
    return os.str();
  }

 private:
  static void write_line(std::ostream& os, const std::vector<std::string>& cells) {
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j) os << ',';
      os << cells[j];
    }
    os << '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path);
  os << text;
  if (!os) throw ConfigError("write failed for " + path);
}

inline void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json point_json(const Point& p, int dim) { return std::vector<double>(p.begin(), p.begin() + dim); }

// ---------------------------------------------------------------------------
// Tables

inline CsvTable frequency_table(const FrequencyReport& rep) {
  CsvTable t({"r", "E", "H", "N"});
  for (std::size_t j = 0; j < rep.radii.size(); ++j) t.add_row({rep.radii[j], rep.E[j], rep.H[j], rep.N[j]});
  return t;
}

inline CsvTable energy_table(const SolveResult& r) {
  CsvTable t({"sweep", "energy"});
  for (std::size_t j = 0; j < r.energy_history.size(); ++j)
    t.add_row({static_cast<double>(j + 1), r.energy_history[j]});
  return t;
}

inline CsvTable interface_table(const InterfacePointSet& fb) {
  std::vector<std::string> header;
  for (int a = 0; a < fb.n; ++a) header.push_back("x" + std::to_string(a + 1));
  CsvTable t(header);
  for (const auto& p : fb.points) t.add_row(std::vector<double>(p.begin(), p.begin() + fb.n));
  return t;
}

inline CsvTable classification_table(const NodalClassification& c, int n) {
  std::vector<std::string> header;
  for (int a = 0; a < n; ++a) header.push_back("x" + std::to_string(a + 1));
  header.push_back("N0plus");
  header.push_back("label");
  CsvTable t(header);
  for (std::size_t j = 0; j < c.points.size(); ++j) {
    std::vector<std::string> row;
    for (int a = 0; a < n; ++a) row.push_back(format_number(c.points[j][a]));
    row.push_back(format_number(c.estimates[j]));
    row.push_back(to_string(c.labels[j]));
    t.add_row(std::move(row));
  }
  return t;
}

inline CsvTable oscillation_table(const OscillationReport& rep) {
  CsvTable t({"radius", "a1", "b1", "a2", "b2", "osc"});
  for (std::size_t m = 0; m < rep.radii.size(); ++m)
    t.add_row({rep.radii[m], rep.a1[m], rep.b1[m], rep.a2[m], rep.b2[m], rep.osc[m]});
  return t;
}

inline CsvTable expansion_table(const std::vector<Point>& where, const std::vector<ExpansionCoefficients>& e, int n) {
  std::vector<std::string> header;
  for (int a = 0; a < n; ++a) header.push_back("x" + std::to_string(a + 1));
  header.push_back("a0");
  for (int a = 0; a + 1 < n; ++a) header.push_back("a" + std::to_string(a + 1));
  for (const char* s : {"b1", "b2", "transmission_defect", "residual"}) header.push_back(s);
  CsvTable t(header);
  for (std::size_t j = 0; j < e.size(); ++j) {
    std::vector<double> row(where[j].begin(), where[j].begin() + n);
    row.push_back(e[j].a0);
    for (double v : e[j].a_prime) row.push_back(v);
    for (double v : {e[j].b1, e[j].b2, e[j].transmission_defect, e[j].residual}) row.push_back(v);
    t.add_row(row);
  }
  return t;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const FrequencyReport& r, int dim) {
  return {{"center", point_json(r.center, dim)}, {"radii", r.radii}, {"E", r.E}, {"H", r.H}, {"N", r.N},
          {"N_zero_plus", r.N_zero_plus}, {"monotonicity_defect", r.monotonicity_defect}};
}

inline nlohmann::json to_json(const SolveResult& r) {
  return {{"energy", r.energy},
          {"segregation_defect", r.segregation_defect},
          {"sweeps", r.sweeps},
          {"converged", r.converged},
          {"support_cycle", r.support_cycle},
          {"residual_sup_laplacian", r.residuals.sup_laplacian},
          {"residual_exclusion", r.residuals.exclusion}};
}

inline nlohmann::json to_json(const ExpansionCoefficients& e) {
  return {{"a0", e.a0}, {"a_prime", e.a_prime}, {"b1", e.b1}, {"b2", e.b2},
          {"transmission_defect", e.transmission_defect}, {"residual", e.residual}, {"samples", e.samples}};
}

inline nlohmann::json to_json(const HomogeneousFit& f, int n) {
  return {{"amplitude", f.amplitude}, {"direction", point_json(f.direction, n)}, {"degree", f.degree},
          {"residual", f.residual}, {"converged", f.converged}};
}

inline nlohmann::json to_json(const FlatnessReport& r, int n) {
  return {{"epsilon", r.epsilon}, {"direction", point_json(r.direction, n)}, {"amplitude", r.amplitude},
          {"rho", r.rho}, {"center", point_json(r.center, n + 1)}, {"nodes", r.nodes},
          {"epsilon_bar", r.epsilon_bar}, {"verified", r.verified}};
}

inline nlohmann::json to_json(const ImprovementResult& r, int n) {
  return {{"epsilon_in", r.epsilon_in},       {"rho", r.rho},
          {"epsilon_out", r.epsilon_out},     {"epsilon_rescaled", r.epsilon_rescaled},
          {"epsilon_identity", r.epsilon_identity}, {"nu_out", point_json(r.nu_out, n)},
          {"alpha_out", r.alpha_out},         {"evaluations", r.evaluations}};
}

inline nlohmann::json to_json(const GraphFit& f) {
  return {{"c0", f.c0}, {"gradient", f.gradient}, {"hessian", f.hessian}, {"sup_gradient", f.sup_gradient},
          {"holder_proxy", f.holder_proxy}, {"residual", f.residual}, {"points", f.points}};
}

inline nlohmann::json to_json(const EigenReport& r) {
  return {{"lambda1", r.lambda1}, {"gamma", r.gamma}, {"iterations", r.iterations}, {"residual", r.residual}};
}

}  // namespace segfb
