#pragma once

#include "tdcshell/common.hpp"
#include "tdcshell/nurbs.hpp"
#include "tdcshell/quadrature.hpp"
#include "tdcshell/shell_core.hpp"
#include "tdcshell/surface.hpp"
#include "tdcshell/tdc_ops.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace tdcshell {

/// Element matrices in local DOF order comp * n + a.
struct ElementMatrices {
  std::vector<int> indices;  ///< global basis index per local shape function
  Eigen::MatrixXd K_M;
  Eigen::MatrixXd K_B;
  Eigen::MatrixXd K;
  Eigen::VectorXd f;
};

enum class BendingForm { Covariant, Directional };

/// Default rule: (p+1) Gauss points per direction, p the larger degree.
inline int default_quadrature_points(const NurbsPatch& patch) { return std::max(patch.degree_u(), patch.degree_v()) + 1; }

/// Membrane and bending stiffness of one element from TDC shape derivatives.
inline ElementMatrices element_stiffness(const ShellSurface& surf, int elem, const Material& mat, const QuadratureRule& rule,
                                         BendingForm form = BendingForm::Directional) {
  const ElementBounds bounds = surf.patch().element_bounds(elem);
  ElementMatrices em;
  int n = -1;
  const double mu = mat.mu(), lambda = mat.lambda(), db = mat.bending_rigidity(), nu = mat.nu;
  for (int q = 0; q < rule.size(); ++q) {
    const BasisEval be = surf.eval_basis(elem, rule.map(q, bounds), 2);
    if (n < 0) {
      n = be.size();
      em.indices = be.indices;
      em.K_M = Eigen::MatrixXd::Zero(3 * n, 3 * n);
      em.K_B = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    } else if (be.size() != n) {
      throw DomainError("quadrature point falls outside the element support");
    }
    const SurfaceFrame fr = build_frame(surf.eval_geometry(be));
    const double dA = rule.scaled_weight(q, bounds) * fr.area_element;
    const Eigen::MatrixXd G = tangential_gradient_scalar(be, fr);
    const std::vector<Mat3> hd = hessian_dir(be, fr);

    const Eigen::MatrixXd GG = G * G.transpose();
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) {
        Eigen::MatrixXd blk = mu * G.col(j) * G.col(k).transpose() + lambda * G.col(k) * G.col(j).transpose();
        if (fr.P(k, j) != 0.0) blk += mu * fr.P(k, j) * GG;
        em.K_M.block(k * n, j * n, n, n) += (mat.t * dA) * blk;
      }

    Eigen::MatrixXd A(n, 9), B(n, 9);
    Eigen::VectorXd tr(n);
    for (int a = 0; a < n; ++a) {
      const Mat3& h = hd[static_cast<std::size_t>(a)];
      tr(a) = h.trace();
      if (form == BendingForm::Covariant) {
        const Mat3 hc = fr.P * h;
        for (int e = 0; e < 9; ++e) A(a, e) = hc(e % 3, e / 3);
        B.row(a) = A.row(a);
      } else {
        // (1-nu) P_ea He_a(a,b) He_b(b,e) = vec(He_a) . vec(P He_b^T)
        const Mat3 pb = fr.P * h.transpose();
        for (int e = 0; e < 9; ++e) {
          A(a, e) = h(e % 3, e / 3);
          B(a, e) = pb(e % 3, e / 3);
        }
      }
    }
    const Eigen::MatrixXd Kt = (1.0 - nu) * A * B.transpose() + nu * tr * tr.transpose();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double c = db * dA * fr.normal(i) * fr.normal(j);
        if (c != 0.0) em.K_B.block(i * n, j * n, n, n) += c * Kt;
      }
  }
  em.K = em.K_M + em.K_B;
  em.f = Eigen::VectorXd::Zero(3 * n);
  return em;
}

/// Distributed load per unit area as a function of the surface point and its parameters.
using LoadFunction = std::function<Vec3(const Vec3& x, ParamPoint pt)>;

/// Force applied at a parametric location (consistent point load).
struct PointLoad {
  ParamPoint at;
  Vec3 force = Vec3::Zero();
};

/// Consistent element load vector in local DOF order.
inline Eigen::VectorXd element_load(const ShellSurface& surf, int elem, const LoadFunction& f, const QuadratureRule& rule) {
  const ElementBounds bounds = surf.patch().element_bounds(elem);
  Eigen::VectorXd out;
  int n = -1;
  for (int q = 0; q < rule.size(); ++q) {
    const BasisEval be = surf.eval_basis(elem, rule.map(q, bounds), 1);
    if (n < 0) {
      n = be.size();
      out = Eigen::VectorXd::Zero(3 * n);
    }
    const SurfaceFrame fr = build_frame(surf.eval_geometry(be));
    const Vec3 load = f(fr.x, be.point);
    const double dA = rule.scaled_weight(q, bounds) * fr.area_element;
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < n; ++a) out(c * n + a) += dA * load(c) * be.value(a);
  }
  return out;
}

enum class BcType { Free, SimplySupported, Clamped, Symmetry, Diaphragm };

inline std::string_view bc_type_name(BcType t) {
  switch (t) {
    case BcType::Free: return "free";
    case BcType::SimplySupported: return "simply_supported";
    case BcType::Clamped: return "clamped";
    case BcType::Symmetry: return "symmetry";
    case BcType::Diaphragm: return "diaphragm";
  }
  return "?";
}

/// Support on one edge. Diaphragm blocks the displacement components flagged in `components`.
struct BoundaryCondition {
  Edge edge = Edge::South;
  BcType type = BcType::Free;
  std::array<bool, 3> components{true, false, true};
};

/// Multiplier rows for one edge, columns in global DOF order comp * nb + b.
struct ConstraintBlock {
  std::vector<Eigen::Triplet<double>> entries;  ///< row indices local to the block
  int rows = 0;
};

/// Basis functions whose trace on `edge` is nonzero (the multiplier basis).
inline std::vector<int> edge_basis(const NurbsPatch& patch, Edge e) {
  std::vector<int> out;
  const int nu = patch.count_u(), nv = patch.count_v();
  switch (e) {
    case Edge::South: for (int i = 0; i < nu; ++i) out.push_back(patch.basis_index(i, 0)); break;
    case Edge::North: for (int i = 0; i < nu; ++i) out.push_back(patch.basis_index(i, nv - 1)); break;
    case Edge::West: for (int j = 0; j < nv; ++j) out.push_back(patch.basis_index(0, j)); break;
    case Edge::East: for (int j = 0; j < nv; ++j) out.push_back(patch.basis_index(nu - 1, j)); break;
  }
  return out;
}

/// Elements adjacent to an edge with the parametric coordinate of the edge line.
inline std::vector<int> edge_elements(const NurbsPatch& patch, Edge e) {
  std::vector<int> out;
  const int eu = patch.num_elements_u(), ev = patch.num_elements_v();
  switch (e) {
    case Edge::South: for (int i = 0; i < eu; ++i) out.push_back(patch.element_id(i, 0)); break;
    case Edge::North: for (int i = 0; i < eu; ++i) out.push_back(patch.element_id(i, ev - 1)); break;
    case Edge::West: for (int j = 0; j < ev; ++j) out.push_back(patch.element_id(0, j)); break;
    case Edge::East: for (int j = 0; j < ev; ++j) out.push_back(patch.element_id(eu - 1, j)); break;
  }
  return out;
}

/// Constraint rows of one boundary condition, integrated with `points_per_edge` Gauss points per span.
inline ConstraintBlock constraint_matrix(const ShellSurface& surf, const BoundaryCondition& bc, int points_per_edge = 0) {
  ConstraintBlock blk;
  if (bc.type == BcType::Free) return blk;
  if (!surf.has_edge(bc.edge)) throw DomainError("edge '" + std::string(edge_name(bc.edge)) + "' is periodic and cannot carry a support");
  const NurbsPatch& patch = surf.patch();
  if (points_per_edge <= 0) points_per_edge = default_quadrature_points(patch);
  const int nb = patch.num_basis();
  const std::vector<int> lbasis = edge_basis(patch, bc.edge);
  const int nl = static_cast<int>(lbasis.size());
  std::map<int, int> lpos;
  for (int k = 0; k < nl; ++k) lpos.emplace(lbasis[static_cast<std::size_t>(k)], k);

  // Row layout: groups of nl rows.
  std::vector<int> comp_groups;  // displacement component per group, -1 co-normal, -2 rotation
  switch (bc.type) {
    case BcType::SimplySupported: comp_groups = {0, 1, 2}; break;
    case BcType::Clamped: comp_groups = {0, 1, 2, -2}; break;
    case BcType::Symmetry: comp_groups = {-1, -2}; break;
    case BcType::Diaphragm:
      for (int c = 0; c < 3; ++c)
        if (bc.components[static_cast<std::size_t>(c)]) comp_groups.push_back(c);
      break;
    case BcType::Free: break;
  }
  blk.rows = nl * static_cast<int>(comp_groups.size());

  const GaussLegendre1D g = gauss_legendre(points_per_edge);
  const int along = edge_direction(bc.edge);
  const KnotVector& kv_across = along == 0 ? patch.knots_v() : patch.knots_u();
  const double fixed = edge_outward_sign(bc.edge) > 0 ? kv_across.back() : kv_across.front();
  std::map<std::pair<int, int>, double> acc;  // ordered for deterministic output
  for (int elem : edge_elements(patch, bc.edge)) {
    const ElementBounds b = patch.element_bounds(elem);
    const double a0 = along == 0 ? b.u0 : b.v0, a1 = along == 0 ? b.u1 : b.v1;
    for (int q = 0; q < points_per_edge; ++q) {
      const double s = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * g.points[static_cast<std::size_t>(q)];
      const ParamPoint pt = along == 0 ? ParamPoint{s, fixed} : ParamPoint{fixed, s};
      const BasisEval be = surf.eval_basis(elem, pt, 1);
      SurfaceFrame fr = build_frame(surf.eval_geometry(be));
      attach_boundary(fr, bc.edge);
      const double ds = 0.5 * (a1 - a0) * g.weights[static_cast<std::size_t>(q)] * fr.J.col(along).norm();
      const Eigen::MatrixXd G = tangential_gradient_scalar(be, fr);
      const Vec3 nd = *fr.boundary_conormal;
      for (int l = 0; l < be.size(); ++l) {
        const auto it = lpos.find(be.indices[static_cast<std::size_t>(l)]);
        if (it == lpos.end()) continue;
        const double Nl = be.value(l);
        if (Nl == 0.0) continue;
        for (std::size_t gi = 0; gi < comp_groups.size(); ++gi) {
          const int row = static_cast<int>(gi) * nl + it->second;
          for (int bb = 0; bb < be.size(); ++bb) {
            const int gb = be.indices[static_cast<std::size_t>(bb)];
            const double Nb = be.value(bb);
            const int grp = comp_groups[gi];
            if (grp >= 0) {
              acc[{row, grp * nb + gb}] += ds * Nl * Nb;
            } else if (grp == -1) {
              for (int c = 0; c < 3; ++c) acc[{row, c * nb + gb}] += ds * Nl * nd(c) * Nb;
            } else {
              const double dn = G.row(bb).dot(nd);
              for (int c = 0; c < 3; ++c) acc[{row, c * nb + gb}] += ds * Nl * fr.normal(c) * dn;
            }
          }
        }
      }
    }
  }
  for (const auto& [rc, v] : acc)
    if (v != 0.0) blk.entries.emplace_back(rc.first, rc.second, v);
  return blk;
}

/// Symmetric indefinite system [K C; C^T 0] in the library's row convention B = C^T.
struct SaddleSystem {
  int num_basis = 0;
  Eigen::SparseMatrix<double> K;
  Eigen::SparseMatrix<double> B;  ///< constraint rows (multipliers x displacement DOFs)
  Eigen::VectorXd f;
  int removed_constraints = 0;  ///< redundant rows dropped by rank filtering

  int num_dofs() const { return 3 * num_basis; }
  int num_multipliers() const { return static_cast<int>(B.rows()); }
};

struct LoadSet {
  LoadFunction distributed;  ///< may be empty
  std::vector<PointLoad> points;
};

/// Single displacement component held at zero at a parameter point.
struct PointSupport {
  ParamPoint at;
  int component = 0;
};

struct AssemblyOptions {
  int quadrature_points = 0;  ///< per direction; 0 = degree + 1
  BendingForm bending = BendingForm::Directional;
};

namespace detail {

/// Keeps a maximal linearly independent subset of constraint rows (relative threshold 1e-10).
inline std::vector<int> independent_rows(const Eigen::SparseMatrix<double, Eigen::RowMajor>& B) {
  std::vector<int> cols;  // DOF columns touched by any row
  {
    std::vector<char> used(static_cast<std::size_t>(B.cols()), 0);
    for (int r = 0; r < B.outerSize(); ++r)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(B, r); it; ++it) used[static_cast<std::size_t>(it.col())] = 1;
    for (int c = 0; c < B.cols(); ++c)
      if (used[static_cast<std::size_t>(c)]) cols.push_back(c);
  }
  std::vector<int> colpos(static_cast<std::size_t>(B.cols()), -1);
  for (std::size_t k = 0; k < cols.size(); ++k) colpos[static_cast<std::size_t>(cols[k])] = static_cast<int>(k);
  Eigen::MatrixXd Bt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols.size()), B.rows());
  for (int r = 0; r < B.outerSize(); ++r) {
    double nrm = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(B, r); it; ++it) nrm = std::max(nrm, std::abs(it.value()));
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(B, r); it; ++it)
      Bt(colpos[static_cast<std::size_t>(it.col())], r) = it.value() / nrm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Bt);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  std::vector<int> keep;
  for (int k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()(k));
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace detail

/// Assembles stiffness, load and constraint rows (redundant rows removed).
inline SaddleSystem assemble(const ShellSurface& surf, const Material& mat, const LoadSet& loads,
                             const std::vector<BoundaryCondition>& bcs, const AssemblyOptions& opt = {},
                             const std::vector<PointSupport>& pins = {}) {
  const NurbsPatch& patch = surf.patch();
  const int nb = patch.num_basis();
  const int nq = opt.quadrature_points > 0 ? opt.quadrature_points : default_quadrature_points(patch);
  const QuadratureRule rule = gauss_rule(nq);
  SaddleSystem sys;
  sys.num_basis = nb;
  sys.f = Eigen::VectorXd::Zero(3 * nb);
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < surf.num_elements(); ++e) {
    const ElementMatrices em = element_stiffness(surf, e, mat, rule, opt.bending);
    const int n = static_cast<int>(em.indices.size());
    for (int cj = 0; cj < 3; ++cj)
      for (int b = 0; b < n; ++b)
        for (int ci = 0; ci < 3; ++ci)
          for (int a = 0; a < n; ++a) {
            const double v = em.K(ci * n + a, cj * n + b);
            if (v != 0.0) trip.emplace_back(ci * nb + em.indices[static_cast<std::size_t>(a)], cj * nb + em.indices[static_cast<std::size_t>(b)], v);
          }
    if (loads.distributed) {
      const Eigen::VectorXd fe = element_load(surf, e, loads.distributed, rule);
      for (int c = 0; c < 3; ++c)
        for (int a = 0; a < n; ++a) sys.f(c * nb + em.indices[static_cast<std::size_t>(a)]) += fe(c * n + a);
    }
  }
  sys.K.resize(3 * nb, 3 * nb);
  sys.K.setFromTriplets(trip.begin(), trip.end());
  for (const PointLoad& pl : loads.points) {
    const int elem = patch.locate(pl.at);
    const BasisEval be = surf.eval_basis(elem, pl.at, 0);
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < be.size(); ++a) sys.f(c * nb + be.indices[static_cast<std::size_t>(a)]) += pl.force(c) * be.value(a);
  }

  std::vector<Eigen::Triplet<double>> ctrip;
  int rows = 0;
  for (const BoundaryCondition& bc : bcs) {
    const ConstraintBlock blk = constraint_matrix(surf, bc, nq);
    for (const auto& t : blk.entries) ctrip.emplace_back(rows + t.row(), t.col(), t.value());
    rows += blk.rows;
  }
  for (const PointSupport& ps : pins) {
    if (ps.component < 0 || ps.component > 2) throw DomainError("point support component must be 0, 1 or 2");
    const BasisEval be = surf.eval_basis(patch.locate(ps.at), ps.at, 0);
    for (int a = 0; a < be.size(); ++a)
      if (be.value(a) != 0.0) ctrip.emplace_back(rows, ps.component * nb + be.indices[static_cast<std::size_t>(a)], be.value(a));
    ++rows;
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> Ball(rows, 3 * nb);
  Ball.setFromTriplets(ctrip.begin(), ctrip.end());
  // Empty rows (multiplier functions with no support on the edge) are dropped with the dependent ones.
  const std::vector<int> keep = rows > 0 ? detail::independent_rows(Ball) : std::vector<int>{};
  sys.removed_constraints = rows - static_cast<int>(keep.size());
  std::vector<Eigen::Triplet<double>> kt;
  for (std::size_t k = 0; k < keep.size(); ++k)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Ball, keep[k]); it; ++it)
      kt.emplace_back(static_cast<int>(k), static_cast<int>(it.col()), it.value());
  sys.B.resize(static_cast<Eigen::Index>(keep.size()), 3 * nb);
  sys.B.setFromTriplets(kt.begin(), kt.end());
  return sys;
}

struct SolveResult {
  DisplacementField u;
  Eigen::VectorXd multipliers;
  double condition_estimate = 0.0;  ///< 1-norm estimate of the scaled saddle matrix
  double relative_residual = 0.0;   ///< ||A x - b|| / ||b||
  double energy = 0.0;              ///< stored elastic energy 0.5 u^T K u
  int dofs = 0;
  int removed_constraints = 0;
};

struct SolveOptions {
  /// Systems whose scaled condition estimate exceeds this are reported singular.
  double singular_condition = 1e14;
  /// Dense nullspace counting is attempted up to this many unknowns.
  int nullspace_limit = 2500;
  /// Accepted ||A x - b|| / ||b|| after iterative refinement.
  double max_relative_residual = 1e-8;
};

namespace detail {

/// Hager/Higham 1-norm estimate of ||A^{-1}||_1 for symmetric A given a solver.
template <typename Solver>
double inverse_norm1_estimate(const Solver& lu, int n) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / n);
  double est = 0.0;
  for (int it = 0; it < 5; ++it) {
    const Eigen::VectorXd y = lu.solve(x);
    const double ny = y.lpNorm<1>();
    if (it > 0 && ny <= est) break;
    est = ny;
    Eigen::VectorXd xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    const Eigen::VectorXd z = lu.solve(xi);  // A symmetric: A^{-T} = A^{-1}
    Eigen::Index j;
    const double zmax = z.cwiseAbs().maxCoeff(&j);
    if (it > 0 && zmax <= z.dot(x)) break;
    x.setZero();
    x(j) = 1.0;
  }
  return est;
}

inline double norm1(const Eigen::SparseMatrix<double>& A) {
  double m = 0.0;
  for (int c = 0; c < A.outerSize(); ++c) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it) s += std::abs(it.value());
    m = std::max(m, s);
  }
  return m;
}

inline int count_nullspace(const Eigen::SparseMatrix<double>& A) {
  const Eigen::MatrixXd D(A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
  const double mx = es.eigenvalues().cwiseAbs().maxCoeff();
  int c = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i)) <= 1e-10 * mx) ++c;
  return c;
}

}  // namespace detail

/// Direct solve of the saddle system with symmetric diagonal scaling.
inline SolveResult solve(const SaddleSystem& sys, const SolveOptions& opt = {}) {
  const int nd = sys.num_dofs();
  const int nm = sys.num_multipliers();
  const int N = nd + nm;
  // Scaling: K_ii -> 1, constraint rows to unit max entry after column scaling.
  Eigen::VectorXd s(N);
  for (int i = 0; i < nd; ++i) {
    const double d = sys.K.coeff(i, i);
    s(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
  }
  {
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(nm);
    for (int c = 0; c < sys.B.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.B, c); it; ++it)
        rmax(it.row()) = std::max(rmax(it.row()), std::abs(it.value()) * s(c));
    for (int r = 0; r < nm; ++r) s(nd + r) = rmax(r) > 0.0 ? 1.0 / rmax(r) : 1.0;
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(sys.K.nonZeros() + 2 * sys.B.nonZeros()));
  for (int c = 0; c < sys.K.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.K, c); it; ++it)
      t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value() * s(it.row()) * s(it.col()));
  for (int c = 0; c < sys.B.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.B, c); it; ++it) {
      const double v = it.value() * s(nd + it.row()) * s(c);
      t.emplace_back(nd + static_cast<int>(it.row()), c, v);
      t.emplace_back(c, nd + static_cast<int>(it.row()), v);
    }
  Eigen::SparseMatrix<double> A(N, N);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(N);
  b.head(nd) = sys.f.cwiseProduct(s.head(nd));

  auto singular = [&](const std::string& why) {
    const int dim = N <= opt.nullspace_limit ? detail::count_nullspace(A) : -1;
    return SingularSystemError("singular saddle system (" + why + "), nullspace dimension " +
                                   (dim >= 0 ? std::to_string(dim) : std::string("not counted")),
                               dim);
  };

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw singular("factorization failed");
  const double cond = detail::norm1(A) * detail::inverse_norm1_estimate(lu, N);
  if (!std::isfinite(cond) || cond > opt.singular_condition) throw singular("condition estimate " + std::to_string(cond));

  Eigen::VectorXd x = lu.solve(b);
  const double bn = b.norm();
  double rel = bn > 0.0 ? (A * x - b).norm() / bn : (A * x).norm();
  for (int it = 0; it < 3 && rel > 1e-13; ++it) {
    x += lu.solve(b - A * x);
    rel = bn > 0.0 ? (A * x - b).norm() / bn : (A * x).norm();
  }
  if (!x.allFinite()) throw NumericalError("solution contains non-finite values");
  if (rel > opt.max_relative_residual) throw NumericalError("solve residual " + std::to_string(rel) + " after refinement");

  SolveResult r;
  const Eigen::VectorXd xd = x.head(nd).cwiseProduct(s.head(nd));
  r.u = DisplacementField::from_vector(xd, sys.num_basis);
  r.multipliers = x.tail(nm).cwiseProduct(s.tail(nm));
  r.condition_estimate = cond;
  r.relative_residual = rel;
  r.energy = 0.5 * xd.dot(sys.K * xd);
  r.dofs = nd;
  r.removed_constraints = sys.removed_constraints;
  return r;
}

inline SolveResult assemble_and_solve(const ShellSurface& surf, const Material& mat, const LoadSet& loads,
                                      const std::vector<BoundaryCondition>& bcs, const AssemblyOptions& aopt = {},
                                      const SolveOptions& sopt = {}, const std::vector<PointSupport>& pins = {}) {
  return solve(assemble(surf, mat, loads, bcs, aopt, pins), sopt);
}

/// Writes a sparse matrix in MatrixMarket coordinate format (1-based, %.17g).
inline void write_matrix_market(const std::string& path, const Eigen::SparseMatrix<double>& A) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw DomainError("cannot open '" + path + "' for writing");
  std::fprintf(fp, "%%%%MatrixMarket matrix coordinate real general\n%ld %ld %ld\n", static_cast<long>(A.rows()),
               static_cast<long>(A.cols()), static_cast<long>(A.nonZeros()));
  for (int c = 0; c < A.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it)
      std::fprintf(fp, "%ld %ld %.17g\n", static_cast<long>(it.row() + 1), static_cast<long>(it.col() + 1), it.value());
  std::fclose(fp);
}

}  // namespace tdcshell
