#pragma once

#include "tdcshell/bench_suite.hpp"
#include "tdcshell/testing/verify_suite.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace fixtures {

using namespace tdcshell;

/// Exact sphere map x = R (sin u cos v, sin u sin v, cos u); outward normal.
inline GeometryEval sphere(double R, ParamPoint pt, int order) {
  GeometryEval g;
  g.order = order;
  g.derivs.assign(static_cast<std::size_t>(deriv_slot_count(order)), Vec3::Zero());
  const double q = std::numbers::pi / 2.0;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; a + b <= order; ++b) {
      const double st = std::sin(pt.u + a * q), sp = std::sin(pt.v + b * q), cp = std::cos(pt.v + b * q);
      g.derivs[static_cast<std::size_t>(deriv_slot(a, b))] = R * Vec3(st * cp, st * sp, b == 0 ? std::cos(pt.u + a * q) : 0.0);
    }
  return g;
}

/// Same sphere with the parameters swapped, so the normal points inward.
inline GeometryEval sphere_inward(double R, ParamPoint pt, int order) {
  const GeometryEval s = sphere(R, {pt.v, pt.u}, order);
  GeometryEval g = s;
  for (int a = 0; a <= order; ++a)
    for (int b = 0; a + b <= order; ++b) g.derivs[static_cast<std::size_t>(deriv_slot(a, b))] = s.d(b, a);
  return g;
}

/// Doubly curved cubic patch with nonuniform weights, refined to degree p and n spans.
inline NurbsPatch curved_patch(int p = 4, int n = 2, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  return tdcshell::testing::random_patch(rng, 3, p, n, 0.3);
}

/// Field value sum_a c_a N_a at a point of a patch for scalar coefficients c.
inline double scalar_field(const NurbsPatch& patch, const Eigen::VectorXd& c, ParamPoint pt) {
  const BasisEval be = patch.eval_basis(patch.locate(pt), pt, 0);
  double v = 0.0;
  for (int a = 0; a < be.size(); ++a) v += c(be.indices[static_cast<std::size_t>(a)]) * be.value(a);
  return v;
}

}  // namespace fixtures
