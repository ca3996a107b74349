#pragma once

// ".sfld" field files: one line of JSON header terminated by '\n', followed by
// the node values as little-endian IEEE-754 doubles in storage order
// (z fastest, x_1 slowest).

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "segfb/errors.hpp"
#include "segfb/grid.hpp"

namespace segfb {

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
    return r;
  }
}

}  // namespace detail

inline nlohmann::json field_header(const ScalarField& f) {
  const auto& g = f.grid;
  nlohmann::json dims = nlohmann::json::array(), lower = nlohmann::json::array(), upper = nlohmann::json::array();
  for (int a = 0; a < g.dim(); ++a) {
    dims.push_back(g.count(a));
    lower.push_back(g.lower(a));
    upper.push_back(g.upper(a));
  }
  return {{"format", "sfld"}, {"version", 1},  {"n", g.n()},        {"dims", dims},
          {"lower", lower},   {"upper", upper}, {"h", g.h()},       {"even_z", f.even_z},
          {"count", g.size()}};
}

inline void write_field(std::ostream& os, const ScalarField& f) {
  os << field_header(f).dump() << '\n';
  for (double v : f.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = detail::to_little_endian(bits);
    char buf[8];
    std::memcpy(buf, &bits, sizeof buf);
    os.write(buf, sizeof buf);
  }
  if (!os) throw PreconditionError("failed writing field data");
}

inline ScalarField read_field(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("missing sfld header");
  nlohmann::json hdr;
  try {
    hdr = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sfld header: ") + e.what());
  }
  if (hdr.value("format", "") != "sfld") throw ConfigError("not an sfld file");
  const int n = hdr.at("n").get<int>();
  const auto lower = hdr.at("lower").get<std::vector<double>>();
  const auto upper = hdr.at("upper").get<std::vector<double>>();
  if (static_cast<int>(lower.size()) != n + 1 || static_cast<int>(upper.size()) != n + 1)
    throw ConfigError("sfld extents do not match dimension");
  ExtensionGrid grid(n, std::vector<double>(lower.begin(), lower.end() - 1),
                     std::vector<double>(upper.begin(), upper.end() - 1), upper.back(), hdr.at("h").get<double>());
  if (hdr.at("count").get<std::size_t>() != grid.size()) throw ConfigError("sfld node count mismatch");
  ScalarField f(grid);
  f.even_z = hdr.value("even_z", true);
  for (auto& v : f.values) {
    char buf[8];
    if (!is.read(buf, sizeof buf)) throw ConfigError("truncated sfld data");
    std::uint64_t bits;
    std::memcpy(&bits, buf, sizeof bits);
    bits = detail::to_little_endian(bits);
    std::memcpy(&v, &bits, sizeof v);
  }
  return f;
}

inline void save_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open " + path + " for writing");
  write_field(os, f);
}

inline ScalarField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open " + path);
  return read_field(is);
}

}  // namespace segfb
