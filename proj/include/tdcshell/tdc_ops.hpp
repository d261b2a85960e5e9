#pragma once

#include "tdcshell/common.hpp"
#include "tdcshell/jet.hpp"
#include "tdcshell/nurbs.hpp"
#include "tdcshell/surface.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace tdcshell {

/// Normal projector P = I - n n^T.
inline Mat3 projector(const Vec3& n) {
  if (std::abs(n.norm() - 1.0) > 1e-12) throw DomainError("projector requires a unit normal");
  return Mat3::Identity() - n * n.transpose();
}

/// Geometry packet at one surface point.
struct SurfaceFrame {
  Vec3 x = Vec3::Zero();
  Mat32 J = Mat32::Zero();  ///< columns x_u, x_v
  Mat2 G = Mat2::Zero();    ///< first fundamental form J^T J
  Vec3 normal = Vec3::Zero();
  Mat3 P = Mat3::Identity();
  Mat32 Q = Mat32::Zero();  ///< J G^{-1}
  double area_element = 0.0;  ///< sqrt(det G)

  // Available when the geometry carries second derivatives.
  bool has_curvature = false;
  std::array<Mat32, 2> dQ{Mat32::Zero(), Mat32::Zero()};  ///< dQ/du, dQ/dv
  Mat3 H = Mat3::Zero();  ///< Weingarten map, grad^dir of the normal
  double kappa1 = 0.0, kappa2 = 0.0;
  double mean_curvature = 0.0;
  double gauss_curvature = 0.0;

  // Boundary points only.
  std::optional<Vec3> boundary_tangent;
  std::optional<Vec3> boundary_conormal;
};

/// Principal curvatures of an in-plane symmetric Weingarten map (sign: positive on a sphere).
inline std::pair<double, double> principal_curvatures(const Mat3& H, const Vec3& n) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (H + H.transpose()));
  std::array<double, 2> k{};
  int m = 0;
  int skipped = 0;
  for (int i = 0; i < 3; ++i) {
    if (skipped == 0 && std::abs(es.eigenvectors().col(i).dot(n)) > 0.99) {
      skipped = 1;
      continue;
    }
    if (m < 2) k[static_cast<std::size_t>(m++)] = -es.eigenvalues()(i);
  }
  if (skipped == 0) {
    // Eigenvector of the zero eigenvalue is not resolved (umbilic flat point); drop the smallest |lambda|.
    std::array<double, 3> ev{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
    std::sort(ev.begin(), ev.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    k = {-ev[1], -ev[2]};
  }
  if (k[0] < k[1]) std::swap(k[0], k[1]);
  return {k[0], k[1]};
}

/// Builds the frame from parametric derivatives of the mapping (order >= 1; >= 2 for curvature).
inline SurfaceFrame build_frame(const GeometryEval& g) {
  if (g.order < 1) throw DomainError("build_frame needs first derivatives of the mapping");
  SurfaceFrame f;
  f.x = g.x();
  f.J.col(0) = g.d(1, 0);
  f.J.col(1) = g.d(0, 1);
  f.G = f.J.transpose() * f.J;
  const double detG = f.G.determinant();
  if (!(detG > 1e-24 * f.G.squaredNorm())) throw NumericalError("degenerate metric (det G ~ 0)");
  const Vec3 c = f.J.col(0).cross(f.J.col(1));
  const double cn = c.norm();
  f.normal = c / cn;
  f.P = Mat3::Identity() - f.normal * f.normal.transpose();
  const Mat2 Ginv = f.G.inverse();
  f.Q = f.J * Ginv;
  f.area_element = std::sqrt(detG);
  if (g.order >= 2) {
    f.has_curvature = true;
    const std::array<Vec3, 2> xu{g.d(1, 0), g.d(0, 1)};
    const std::array<std::array<Vec3, 2>, 2> xuu{{{g.d(2, 0), g.d(1, 1)}, {g.d(1, 1), g.d(0, 2)}}};
    Mat32 dn;
    for (int a = 0; a < 2; ++a) {
      Mat32 dJ;
      dJ.col(0) = xuu[static_cast<std::size_t>(a)][0];
      dJ.col(1) = xuu[static_cast<std::size_t>(a)][1];
      const Mat2 dG = dJ.transpose() * f.J + f.J.transpose() * dJ;
      f.dQ[static_cast<std::size_t>(a)] = dJ * Ginv - f.Q * dG * Ginv;
      const Vec3 dc = dJ.col(0).cross(xu[1]) + xu[0].cross(dJ.col(1));
      dn.col(a) = f.P * dc / cn;
    }
    f.H = dn * f.Q.transpose();
    std::tie(f.kappa1, f.kappa2) = principal_curvatures(f.H, f.normal);
    f.mean_curvature = f.H.trace();
    f.gauss_curvature = f.kappa1 * f.kappa2;
  }
  return f;
}

/// Adds tangent and outward co-normal for a point on `edge`; n_conormal = n x t.
inline void attach_boundary(SurfaceFrame& f, Edge edge) {
  const int along = edge_direction(edge);
  const int across = 1 - along;
  Vec3 t = f.J.col(along).normalized();
  Vec3 nb = f.normal.cross(t);
  if (nb.dot(f.J.col(across)) * edge_outward_sign(edge) < 0.0) {
    t = -t;
    nb = -nb;
  }
  f.boundary_tangent = t;
  f.boundary_conormal = nb;
}

/// Tangential gradients of all shape functions (rows), grad_G N = Q grad_r N.
inline Eigen::MatrixXd tangential_gradient_scalar(const BasisEval& be, const SurfaceFrame& f) {
  if (be.order < 1) throw DomainError("tangential gradient needs first basis derivatives");
  Eigen::MatrixXd grad(be.size(), 3);
  for (int i = 0; i < be.size(); ++i) grad.row(i) = (f.Q * Vec2(be.d(i, 1, 0), be.d(i, 0, 1))).transpose();
  return grad;
}

/// Directional Hessians He^dir(N)_{ij} = d_j(d_i N), generally nonsymmetric on curved surfaces.
inline std::vector<Mat3> hessian_dir(const BasisEval& be, const SurfaceFrame& f) {
  if (be.order < 2 || !f.has_curvature) throw DomainError("directional Hessian needs second derivatives");
  std::vector<Mat3> out(static_cast<std::size_t>(be.size()));
  for (int i = 0; i < be.size(); ++i) {
    const Vec2 gr(be.d(i, 1, 0), be.d(i, 0, 1));
    Mat2 hr;
    hr << be.d(i, 2, 0), be.d(i, 1, 1), be.d(i, 1, 1), be.d(i, 0, 2);
    Mat32 first;
    first.col(0) = f.dQ[0] * gr;
    first.col(1) = f.dQ[1] * gr;
    out[static_cast<std::size_t>(i)] = first * f.Q.transpose() + f.Q * hr * f.Q.transpose();
  }
  return out;
}

/// Covariant Hessians He^cov = P He^dir (symmetric, in-plane).
inline std::vector<Mat3> hessian_cov(const std::vector<Mat3>& hess_dir, const SurfaceFrame& f) {
  std::vector<Mat3> out;
  out.reserve(hess_dir.size());
  for (const Mat3& h : hess_dir) out.push_back(f.P * h);
  return out;
}

/// Surface divergence of a vector field from its directional gradient.
inline double surface_divergence(const Mat3& grad_dir) { return grad_dir.trace(); }

/// Row-wise surface divergence of a tensor field from its partial directional derivatives d_i A.
inline Vec3 surface_divergence(const std::array<Mat3, 3>& partials) {
  Vec3 d = Vec3::Zero();
  for (int j = 0; j < 3; ++j) d += partials[static_cast<std::size_t>(j)].col(j);
  return d;
}

/// Tangential shape-function derivatives at one point.
struct ShapeSurfaceDerivatives {
  Eigen::MatrixXd grad;  ///< n x 3
  std::vector<Mat3> hess_dir;
  std::vector<Mat3> hess_cov;
  int size() const { return static_cast<int>(grad.rows()); }
};

inline ShapeSurfaceDerivatives shape_surface_derivatives(const BasisEval& be, const SurfaceFrame& f) {
  ShapeSurfaceDerivatives s;
  s.grad = tangential_gradient_scalar(be, f);
  if (be.order >= 2 && f.has_curvature) {
    s.hess_dir = hessian_dir(be, f);
    s.hess_cov = hessian_cov(s.hess_dir, f);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Jet-based route: geometry fields as truncated Taylor polynomials, from which
// any order of tangential derivative follows by repeated first-order steps.
// ---------------------------------------------------------------------------

/// Surface fields as jets at one point. Q, n and P have order (geometry order - 1);
/// H has order (geometry order - 2).
struct SurfaceJets {
  int order = 0;  ///< order of Q / n / P
  JetVec x;
  std::array<std::array<Jet, 2>, 3> Q;
  JetVec n;
  JetMat P;
  JetMat H;  ///< valid when order >= 1
  Jet area;  ///< sqrt(det G)
};

/// d^Gamma_{x_i} f = sum_alpha Q_{i alpha} d_alpha f.
inline Jet tangential_derivative(const SurfaceJets& s, const Jet& f, int i) {
  const auto& q = s.Q[static_cast<std::size_t>(i)];
  return q[0] * f.dr() + q[1] * f.ds();
}

inline SurfaceJets surface_jets(const GeometryEval& g) {
  if (g.order < 1) throw DomainError("surface jets need first derivatives of the mapping");
  SurfaceJets s;
  const int m = g.order;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> d(static_cast<std::size_t>(deriv_slot_count(m)));
    for (int k = 0; k < deriv_slot_count(m); ++k) d[static_cast<std::size_t>(k)] = g.derivs[static_cast<std::size_t>(k)](c);
    s.x[static_cast<std::size_t>(c)] = Jet::from_derivatives(d, m);
  }
  s.order = m - 1;
  const JetVec xu{s.x[0].dr(), s.x[1].dr(), s.x[2].dr()};
  const JetVec xv{s.x[0].ds(), s.x[1].ds(), s.x[2].ds()};
  const Jet g11 = dot(xu, xu), g12 = dot(xu, xv), g22 = dot(xv, xv);
  const Jet det = g11 * g22 - g12 * g12;
  const Jet idet = det.reciprocal();
  const Jet i11 = g22 * idet, i12 = -(g12 * idet), i22 = g11 * idet;
  for (int c = 0; c < 3; ++c) {
    s.Q[static_cast<std::size_t>(c)][0] = xu[static_cast<std::size_t>(c)] * i11 + xv[static_cast<std::size_t>(c)] * i12;
    s.Q[static_cast<std::size_t>(c)][1] = xu[static_cast<std::size_t>(c)] * i12 + xv[static_cast<std::size_t>(c)] * i22;
  }
  s.area = det.sqrt();
  const JetVec cr = cross(xu, xv);
  const Jet inv = s.area.reciprocal();  // |x_u x x_v| = sqrt(det G)
  for (int c = 0; c < 3; ++c) s.n[static_cast<std::size_t>(c)] = cr[static_cast<std::size_t>(c)] * inv;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      s.P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          Jet::constant(i == j ? 1.0 : 0.0, s.order) - s.n[static_cast<std::size_t>(i)] * s.n[static_cast<std::size_t>(j)];
  if (s.order >= 1) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        s.H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            tangential_derivative(s, s.n[static_cast<std::size_t>(i)], j);
  }
  return s;
}

/// Jet of a scalar shape function from its basis-derivative row.
inline Jet shape_jet(const BasisEval& be, int i) {
  std::vector<double> d(static_cast<std::size_t>(deriv_slot_count(be.order)));
  for (int k = 0; k < deriv_slot_count(be.order); ++k) d[static_cast<std::size_t>(k)] = be.derivs(i, k);
  return Jet::from_derivatives(d, be.order);
}

/// Directional derivatives of every shape function through order 4, fully unsymmetrized.
///
/// d2[i*3+j] = d_j d_i N, d3[(i*3+j)*3+k] = d_k d_j d_i N, and so on: the last
/// index is the derivative applied last.
struct HighOrderShapeDerivatives {
  int order = 0;
  std::vector<std::array<double, 3>> d1;
  std::vector<std::array<double, 9>> d2;
  std::vector<std::array<double, 27>> d3;
  std::vector<std::array<double, 81>> d4;
};

inline HighOrderShapeDerivatives high_order_derivatives(const BasisEval& be, const GeometryEval& g, int order = 4) {
  if (order < 1 || order > 4) throw DomainError("high-order derivatives support orders 1..4");
  if (be.order < order || g.order < order) throw DomainError("insufficient derivative order for requested tangential derivatives");
  const SurfaceJets s = surface_jets(g);
  HighOrderShapeDerivatives out;
  out.order = order;
  const auto n = static_cast<std::size_t>(be.size());
  out.d1.resize(n);
  if (order >= 2) out.d2.resize(n);
  if (order >= 3) out.d3.resize(n);
  if (order >= 4) out.d4.resize(n);
  for (std::size_t a = 0; a < n; ++a) {
    const Jet N = shape_jet(be, static_cast<int>(a)).truncated(order);
    std::array<Jet, 3> t1;
    for (int i = 0; i < 3; ++i) {
      t1[static_cast<std::size_t>(i)] = tangential_derivative(s, N, i);
      out.d1[a][static_cast<std::size_t>(i)] = t1[static_cast<std::size_t>(i)].value();
    }
    if (order < 2) continue;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Jet t2 = tangential_derivative(s, t1[static_cast<std::size_t>(i)], j);
        out.d2[a][static_cast<std::size_t>(i * 3 + j)] = t2.value();
        if (order < 3) continue;
        for (int k = 0; k < 3; ++k) {
          const Jet t3 = tangential_derivative(s, t2, k);
          out.d3[a][static_cast<std::size_t>((i * 3 + j) * 3 + k)] = t3.value();
          if (order < 4) continue;
          for (int l = 0; l < 3; ++l)
            out.d4[a][static_cast<std::size_t>(((i * 3 + j) * 3 + k) * 3 + l)] = tangential_derivative(s, t3, l).value();
        }
      }
  }
  return out;
}

/// Jets of the spatial partial derivatives d^Gamma_{x_i} H (needs geometry order >= 3).
inline std::array<Mat3, 3> weingarten_derivatives(const SurfaceJets& s) {
  if (s.order < 2) throw DomainError("derivatives of the Weingarten map need third derivatives of the mapping");
  std::array<Mat3, 3> out;
  for (int i = 0; i < 3; ++i)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        out[static_cast<std::size_t>(i)](r, c) =
            tangential_derivative(s, s.H[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)], i).value();
  return out;
}

}  // namespace tdcshell
