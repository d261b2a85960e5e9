#pragma once

#include "tdcshell/nurbs.hpp"

#include <functional>
#include <string_view>
#include <utility>

namespace tdcshell {

/// Patch edges in parametric space.
enum class Edge { South, East, North, West };  // v = v0, u = u1, v = v1, u = u0

inline constexpr std::array<Edge, 4> kAllEdges{Edge::South, Edge::East, Edge::North, Edge::West};

inline std::string_view edge_name(Edge e) {
  switch (e) {
    case Edge::South: return "south";
    case Edge::East: return "east";
    case Edge::North: return "north";
    case Edge::West: return "west";
  }
  return "?";
}

/// Parametric direction running along the edge (0 = u, 1 = v).
inline int edge_direction(Edge e) { return (e == Edge::South || e == Edge::North) ? 0 : 1; }

/// +1 if the outward parametric direction is increasing, -1 otherwise.
inline int edge_outward_sign(Edge e) { return (e == Edge::East || e == Edge::North) ? 1 : -1; }

/// Evaluates the exact mapping and its derivatives through `order` at a parametric point.
using GeometryFunction = std::function<GeometryEval(ParamPoint, int)>;

/// Shell middle surface plus its discretization space.
///
/// Isoparametric by default: geometry is the NURBS patch itself. An exact
/// geometry function may replace the mapping for surfaces that have no exact
/// NURBS form; the patch then only provides the trial/test space.
class ShellSurface {
 public:
  explicit ShellSurface(NurbsPatch patch) : patch_(std::move(patch)) {}
  ShellSurface(NurbsPatch space, GeometryFunction exact) : patch_(std::move(space)), exact_(std::move(exact)) {}

  const NurbsPatch& patch() const { return patch_; }
  bool isoparametric() const { return !exact_; }
  int num_elements() const { return patch_.num_elements(); }
  int num_basis() const { return patch_.num_basis(); }

  BasisEval eval_basis(int elem, ParamPoint pt, int d_max) const { return patch_.eval_basis(elem, pt, d_max); }

  GeometryEval eval_geometry(int elem, ParamPoint pt, int d_max) const {
    if (!exact_) return patch_.eval_geometry(elem, pt, d_max);
    (void)patch_.element_bounds(elem);
    GeometryEval g = exact_(pt, d_max);
    if (d_max >= 1) NurbsPatch::check_nondegenerate(g.d(1, 0), g.d(0, 1));
    return g;
  }

  /// Geometry consistent with an already evaluated basis (no re-evaluation when isoparametric).
  GeometryEval eval_geometry(const BasisEval& be) const {
    if (!exact_) return patch_.geometry_from_basis(be);
    return eval_geometry(be.element, be.point, be.order);
  }

  /// True when `edge` is a physical boundary (periodic directions have none).
  bool has_edge(Edge e) const {
    const KnotVector& kv = edge_direction(e) == 0 ? patch_.knots_v() : patch_.knots_u();
    return !kv.periodic();
  }

 private:
  NurbsPatch patch_;
  GeometryFunction exact_;
};

}  // namespace tdcshell
