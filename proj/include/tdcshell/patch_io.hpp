#pragma once

// Plain-text NURBS patch files.
//
//   tdcshell-patch 1
//   degree <pu> <pv>
//   knots_u <m> <k_0> ... <k_{m-1}>
//   knots_v <m> <k_0> ... <k_{m-1}>
//   points <nu> <nv>
//   <x> <y> <z> <w>          nu * nv lines, u index fastest
//
// Blank lines and lines starting with '#' are skipped. Reals are written with
// 17 significant digits, so write/read reproduces the patch bit for bit.

#include "tdcshell/common.hpp"
#include "tdcshell/nurbs.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace tdcshell {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(const std::string& tok, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size()) throw DomainError("patch line " + std::to_string(line) + ": bad number '" + tok + "'");
  return v;
}

}  // namespace detail

inline std::string write_patch(const NurbsPatch& patch) {
  if (patch.knots_u().periodic() || patch.knots_v().periodic())
    throw DomainError("periodic patches have no file representation");
  std::ostringstream os;
  os << "tdcshell-patch 1\n";
  os << "degree " << patch.degree_u() << ' ' << patch.degree_v() << '\n';
  for (int dir = 0; dir < 2; ++dir) {
    const auto& k = dir == 0 ? patch.knots_u().knots() : patch.knots_v().knots();
    os << (dir == 0 ? "knots_u " : "knots_v ") << k.size();
    for (double v : k) os << ' ' << detail::fmt17(v);
    os << '\n';
  }
  os << "points " << patch.count_u() << ' ' << patch.count_v() << '\n';
  for (std::size_t i = 0; i < patch.control_points().size(); ++i) {
    const Vec3& p = patch.control_points()[i];
    os << detail::fmt17(p.x()) << ' ' << detail::fmt17(p.y()) << ' ' << detail::fmt17(p.z()) << ' '
       << detail::fmt17(patch.weights()[i]) << '\n';
  }
  return os.str();
}

inline NurbsPatch read_patch(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::pair<int, std::vector<std::string>>> lines;
  std::string raw;
  for (int no = 1; std::getline(in, raw); ++no) {
    std::istringstream ls(raw);
    std::vector<std::string> toks;
    for (std::string t; ls >> t;) toks.push_back(t);
    if (toks.empty() || toks[0][0] == '#') continue;
    lines.emplace_back(no, std::move(toks));
  }
  std::size_t at = 0;
  auto next = [&](const std::string& key, std::size_t min_tokens) -> const std::pair<int, std::vector<std::string>>& {
    if (at >= lines.size()) throw DomainError("patch file ends before '" + key + "'");
    const auto& l = lines[at++];
    if (!key.empty() && l.second[0] != key)
      throw DomainError("patch line " + std::to_string(l.first) + ": expected '" + key + "', got '" + l.second[0] + "'");
    if (l.second.size() < min_tokens) throw DomainError("patch line " + std::to_string(l.first) + ": too few fields");
    return l;
  };
  auto to_int = [](const std::string& s, int line) {
    const double v = detail::parse_real(s, line);
    if (v != static_cast<int>(v)) throw DomainError("patch line " + std::to_string(line) + ": expected an integer");
    return static_cast<int>(v);
  };

  const auto& head = next("tdcshell-patch", 2);
  if (head.second[1] != "1") throw DomainError("unsupported patch file version '" + head.second[1] + "'");
  const auto& deg = next("degree", 3);
  const int pu = to_int(deg.second[1], deg.first), pv = to_int(deg.second[2], deg.first);
  std::vector<double> knots[2];
  for (int dir = 0; dir < 2; ++dir) {
    const auto& kl = next(dir == 0 ? "knots_u" : "knots_v", 2);
    const int m = to_int(kl.second[1], kl.first);
    if (static_cast<int>(kl.second.size()) != m + 2)
      throw DomainError("patch line " + std::to_string(kl.first) + ": knot count mismatch");
    for (int i = 0; i < m; ++i) knots[dir].push_back(detail::parse_real(kl.second[static_cast<std::size_t>(i + 2)], kl.first));
  }
  const auto& pl = next("points", 3);
  const int nu = to_int(pl.second[1], pl.first), nv = to_int(pl.second[2], pl.first);
  if (nu < 1 || nv < 1) throw DomainError("patch line " + std::to_string(pl.first) + ": empty control grid");
  std::vector<Vec3> pts;
  std::vector<double> wts;
  for (int k = 0; k < nu * nv; ++k) {
    const auto& l = next("", 4);
    if (l.second.size() != 4) throw DomainError("patch line " + std::to_string(l.first) + ": expected 'x y z w'");
    pts.emplace_back(detail::parse_real(l.second[0], l.first), detail::parse_real(l.second[1], l.first),
                     detail::parse_real(l.second[2], l.first));
    wts.push_back(detail::parse_real(l.second[3], l.first));
  }
  if (at != lines.size()) throw DomainError("patch line " + std::to_string(lines[at].first) + ": trailing data");
  NurbsPatch patch(KnotVector(pu, std::move(knots[0])), KnotVector(pv, std::move(knots[1])), std::move(pts), std::move(wts));
  if (patch.count_u() != nu || patch.count_v() != nv) throw DomainError("control grid size does not match knot vectors");
  return patch;
}

inline void save_patch(const std::string& path, const NurbsPatch& patch) {
  std::ofstream os(path);
  if (!os) throw DomainError("cannot open '" + path + "' for writing");
  os << write_patch(patch);
}

inline NurbsPatch load_patch(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DomainError("cannot open patch file '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return read_patch(ss.str());
}

}  // namespace tdcshell
