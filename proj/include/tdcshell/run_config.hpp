#pragma once

// Run configuration as flat key = value text with [sections]:
//
//   [run]       case (a benchmark name or custom) patch p n study ps ns out jobs quadrature residual oracle timing sample_grid seed
//   [material]  E nu t
//   [load]      f = fx fy fz      point = r s fx fy fz | none
//   [bc]        south east north west = free | simply_supported | clamped | symmetry | diaphragm
//               south_components ... = x,z     pins = r s component; ... | none
//   [geometry]  normal = nx ny nz
//
// Keys left out keep the named case's defaults. Unknown sections and keys are errors.

#include "tdcshell/bench_suite.hpp"
#include "tdcshell/common.hpp"
#include "tdcshell/patch_io.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tdcshell {

class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

struct RunConfig {
  std::string case_name = "flat_shell";
  std::string patch_file;  ///< empty: geometry of the named case
  int p = 3;
  int n = 8;
  bool study = false;
  std::vector<int> ps{2, 3, 4, 5, 6};
  std::vector<int> ns{2, 4, 8, 16, 32};
  std::string out = "out";
  int jobs = 1;
  int quadrature = 0;  ///< Gauss points per direction, 0 = degree + 1
  bool residual = false;
  bool oracle = false;
  bool timing = false;
  int sample_grid = 8;  ///< single runs: field samples on a (g+1)^2 grid; 0 = none
  std::uint64_t seed = 20240611;

  /// Material, loads and supports; starts from default_spec(case_name).
  CaseSpec spec = default_spec("flat_shell");
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& v, std::size_t count) {
  std::istringstream is(v);
  std::vector<double> out;
  for (std::string t; is >> t;) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw ConfigError("'" + key + "': bad number '" + t + "'");
    out.push_back(x);
  }
  if (out.size() != count) throw ConfigError("'" + key + "': expected " + std::to_string(count) + " numbers");
  return out;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long x = 0;
  try {
    x = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  return x;
}

inline int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < -1000000000LL || x > 1000000000LL) throw ConfigError("'" + key + "': value out of range");
  return static_cast<int>(x);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const std::string& t : split(v, ',')) out.push_back(parse_int(key, t));
  if (out.empty()) throw ConfigError("'" + key + "': empty list");
  return out;
}

inline BcType parse_bc_type(const std::string& key, const std::string& v) {
  for (BcType t : {BcType::Free, BcType::SimplySupported, BcType::Clamped, BcType::Symmetry, BcType::Diaphragm})
    if (bc_type_name(t) == v) return t;
  throw ConfigError("'" + key + "': unknown support '" + v + "'");
}

inline int parse_component(const std::string& key, const std::string& v) {
  if (v == "x") return 0;
  if (v == "y") return 1;
  if (v == "z") return 2;
  throw ConfigError("'" + key + "': component must be x, y or z, got '" + v + "'");
}

inline std::string edge_key(Edge e) { return std::string(edge_name(e)); }

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline std::string components_text(const std::array<bool, 3>& c) {
  std::string s;
  for (int k = 0; k < 3; ++k)
    if (c[static_cast<std::size_t>(k)]) s += std::string(s.empty() ? "" : ",") + "xyz"[k];
  return s.empty() ? "none" : s;
}

}  // namespace detail

/// Parses configuration text. Later keys override earlier ones.
inline RunConfig parse_config(const std::string& text) {
  using Entries = std::map<std::string, std::pair<int, std::string>>;  // "section.key" -> (line, value)
  static const std::map<std::string, std::set<std::string>> allowed{
      {"run", {"case", "patch", "p", "n", "study", "ps", "ns", "out", "jobs", "quadrature", "residual", "oracle", "timing",
               "sample_grid", "seed"}},
      {"material", {"E", "nu", "t"}},
      {"load", {"f", "point"}},
      {"bc", {"south", "east", "north", "west", "south_components", "east_components", "north_components",
              "west_components", "pins"}},
      {"geometry", {"normal"}}};
  Entries kv;
  std::string section = "run";
  std::istringstream in(text);
  std::string raw;
  for (int no = 1; std::getline(in, raw); ++no) {
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(no) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!allowed.count(section)) throw ConfigError("line " + std::to_string(no) + ": unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (!allowed.at(section).count(key))
      throw ConfigError("line " + std::to_string(no) + ": unknown key '" + key + "' in [" + section + "]");
    kv[section + "." + key] = {no, value};
  }
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second.second;
  };

  RunConfig c;
  if (auto v = get("run.case")) c.case_name = *v;
  try {
    if (c.case_name == "custom") {
      c.spec = CaseSpec{};
      c.spec.name = "custom";
      c.spec.material = Material(1.0, 0.3, 0.1);
    } else {
      c.spec = default_spec(c.case_name);
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (auto v = get("run.patch")) c.patch_file = *v;
  if (auto v = get("run.p")) c.p = detail::parse_int("p", *v);
  if (auto v = get("run.n")) c.n = detail::parse_int("n", *v);
  if (auto v = get("run.study")) c.study = detail::parse_bool("study", *v);
  if (auto v = get("run.ps")) c.ps = detail::parse_int_list("ps", *v);
  if (auto v = get("run.ns")) c.ns = detail::parse_int_list("ns", *v);
  if (auto v = get("run.out")) c.out = *v;
  if (auto v = get("run.jobs")) c.jobs = detail::parse_int("jobs", *v);
  if (auto v = get("run.quadrature")) c.quadrature = detail::parse_int("quadrature", *v);
  if (auto v = get("run.residual")) c.residual = detail::parse_bool("residual", *v);
  if (auto v = get("run.oracle")) c.oracle = detail::parse_bool("oracle", *v);
  if (auto v = get("run.timing")) c.timing = detail::parse_bool("timing", *v);
  if (auto v = get("run.sample_grid")) c.sample_grid = detail::parse_int("sample_grid", *v);
  if (auto v = get("run.seed")) {
    const long long s = detail::parse_integer("seed", *v);
    if (s < 0) throw ConfigError("'seed': must be nonnegative");
    c.seed = static_cast<std::uint64_t>(s);
  }

  CaseSpec& s = c.spec;
  if (auto v = get("material.E")) s.material.E = detail::parse_reals("E", *v, 1)[0];
  if (auto v = get("material.nu")) s.material.nu = detail::parse_reals("nu", *v, 1)[0];
  if (auto v = get("material.t")) s.material.t = detail::parse_reals("t", *v, 1)[0];
  if (auto v = get("load.f")) {
    const auto f = detail::parse_reals("f", *v, 3);
    s.load = Vec3(f[0], f[1], f[2]);
  }
  if (auto v = get("load.point")) {
    if (*v == "none") {
      s.point_load.reset();
    } else {
      const auto f = detail::parse_reals("point", *v, 5);
      s.point_load = PointLoad{{f[0], f[1]}, Vec3(f[2], f[3], f[4])};
    }
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string name = detail::edge_key(kAllEdges[k]);
    if (auto v = get("bc." + name)) s.bc[k] = detail::parse_bc_type(name, *v);
    if (auto v = get("bc." + name + "_components")) {
      std::array<bool, 3> comp{false, false, false};
      if (*v != "none")
        for (const std::string& t : detail::split(*v, ','))
        comp[static_cast<std::size_t>(detail::parse_component(name + "_components", t))] = true;
      s.bc_components[k] = comp;
    }
  }
  if (auto v = get("bc.pins")) {
    s.pins.clear();
    if (*v != "none")
      for (const std::string& item : detail::split(*v, ';')) {
        std::istringstream is(item);
        std::string r, t, comp, extra;
        if (!(is >> r >> t >> comp) || (is >> extra)) throw ConfigError("'pins': expected 'r s component' entries");
        const auto rs = detail::parse_reals("pins", r + " " + t, 2);
        s.pins.push_back(PointSupport{{rs[0], rs[1]}, detail::parse_component("pins", comp)});
      }
  }
  if (auto v = get("geometry.normal")) {
    const auto f = detail::parse_reals("normal", *v, 3);
    s.normal = Vec3(f[0], f[1], f[2]);
    if (s.normal.norm() == 0.0) throw ConfigError("'normal': must be nonzero");
  }

  if (c.case_name == "custom" && c.patch_file.empty()) throw ConfigError("case 'custom' needs a patch file");
  if (c.p < 1 || c.p > 8) throw ConfigError("'p': degree must be in 1..8");
  if (c.n < 1 || c.n > 256) throw ConfigError("'n': mesh size must be in 1..256");
  for (int p : c.ps)
    if (p < 1 || p > 8) throw ConfigError("'ps': degree must be in 1..8");
  for (int n : c.ns)
    if (n < 1 || n > 256) throw ConfigError("'ns': mesh size must be in 1..256");
  if (c.jobs < 1) throw ConfigError("'jobs': must be at least 1");
  if (c.quadrature < 0 || c.quadrature > 16) throw ConfigError("'quadrature': must be in 0..16");
  if (c.sample_grid < 0) throw ConfigError("'sample_grid': must be nonnegative");
  try {
    s.material.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

/// Writes every key; parse_config(config_text(c)) reproduces c.
inline std::string config_text(const RunConfig& c) {
  const CaseSpec& s = c.spec;
  std::ostringstream os;
  os << "[run]\n";
  os << "case = " << c.case_name << "\n";
  if (!c.patch_file.empty()) os << "patch = " << c.patch_file << "\n";
  os << "p = " << c.p << "\nn = " << c.n << "\n";
  os << "study = " << (c.study ? "true" : "false") << "\n";
  os << "ps = " << detail::join_ints(c.ps) << "\nns = " << detail::join_ints(c.ns) << "\n";
  os << "out = " << c.out << "\njobs = " << c.jobs << "\nquadrature = " << c.quadrature << "\n";
  os << "residual = " << (c.residual ? "true" : "false") << "\n";
  os << "oracle = " << (c.oracle ? "true" : "false") << "\n";
  os << "timing = " << (c.timing ? "true" : "false") << "\n";
  os << "sample_grid = " << c.sample_grid << "\nseed = " << c.seed << "\n";
  os << "\n[material]\n";
  os << "E = " << detail::fmt17(s.material.E) << "\nnu = " << detail::fmt17(s.material.nu) << "\nt = " << detail::fmt17(s.material.t) << "\n";
  os << "\n[load]\n";
  os << "f = " << detail::fmt17(s.load.x()) << ' ' << detail::fmt17(s.load.y()) << ' ' << detail::fmt17(s.load.z()) << "\n";
  os << "point = ";
  if (s.point_load) {
    const PointLoad& pl = *s.point_load;
    os << detail::fmt17(pl.at.u) << ' ' << detail::fmt17(pl.at.v) << ' ' << detail::fmt17(pl.force.x()) << ' '
       << detail::fmt17(pl.force.y()) << ' ' << detail::fmt17(pl.force.z()) << "\n";
  } else {
    os << "none\n";
  }
  os << "\n[bc]\n";
  for (std::size_t k = 0; k < 4; ++k) {
    const std::string name = detail::edge_key(kAllEdges[k]);
    os << name << " = " << bc_type_name(s.bc[k]) << "\n";
    os << name << "_components = " << detail::components_text(s.bc_components[k]) << "\n";
  }
  os << "pins = ";
  if (s.pins.empty()) os << "none";
  for (std::size_t i = 0; i < s.pins.size(); ++i)
    os << (i ? "; " : "") << detail::fmt17(s.pins[i].at.u) << ' ' << detail::fmt17(s.pins[i].at.v) << ' '
       << "xyz"[s.pins[i].component];
  os << "\n\n[geometry]\n";
  os << "normal = " << detail::fmt17(s.normal.x()) << ' ' << detail::fmt17(s.normal.y()) << ' ' << detail::fmt17(s.normal.z()) << "\n";
  return os.str();
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

/// Case description with the user patch attached, ready for make_case / run_case.
inline CaseSpec resolve_spec(const RunConfig& c) {
  CaseSpec s = c.spec;
  if (!c.patch_file.empty()) {
    try {
      s.patch = load_patch(c.patch_file);
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
  return s;
}

}  // namespace tdcshell
