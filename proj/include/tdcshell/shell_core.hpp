#pragma once

#include "tdcshell/common.hpp"
#include "tdcshell/jet.hpp"
#include "tdcshell/nurbs.hpp"
#include "tdcshell/surface.hpp"
#include "tdcshell/tdc_ops.hpp"

#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <utility>

namespace tdcshell {

/// Linear elastic plane-stress material with thickness.
struct Material {
  double E = 1.0;
  double nu = 0.0;
  double t = 1.0;

  Material() = default;
  Material(double E_, double nu_, double t_) : E(E_), nu(nu_), t(t_) { validate(); }

  void validate() const {
    if (!(E > 0.0)) throw DomainError("Young's modulus must be positive");
    if (!(nu >= 0.0 && nu < 0.5)) throw DomainError("Poisson ratio must lie in [0, 0.5)");
    if (!(t > 0.0)) throw DomainError("thickness must be positive");
  }

  double mu() const { return E / (2.0 * (1.0 + nu)); }
  double lambda() const { return E * nu / (1.0 - nu * nu); }
  double bending_rigidity() const { return E * t * t * t / (12.0 * (1.0 - nu * nu)); }
  double membrane_rigidity() const { return E * t / (1.0 - nu * nu); }
  /// Thickness coordinate range of the pre-integration.
  std::pair<double, double> zeta_range() const { return {-0.5 * t, 0.5 * t}; }
};

/// Control-point displacement coefficients, one row (u, v, w) per basis function.
struct DisplacementField {
  Eigen::MatrixX3d coeffs;

  DisplacementField() = default;
  explicit DisplacementField(int num_basis) : coeffs(Eigen::MatrixX3d::Zero(num_basis, 3)) {}
  explicit DisplacementField(Eigen::MatrixX3d c) : coeffs(std::move(c)) {}

  int num_basis() const { return static_cast<int>(coeffs.rows()); }

  /// Global DOF vector, component-major: index comp * nb + b.
  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(3 * coeffs.rows());
    for (int c = 0; c < 3; ++c) v.segment(c * coeffs.rows(), coeffs.rows()) = coeffs.col(c);
    return v;
  }
  static DisplacementField from_vector(const Eigen::VectorXd& v, int num_basis) {
    if (v.size() < 3 * num_basis) throw DomainError("DOF vector shorter than 3 x number of basis functions");
    DisplacementField f(num_basis);
    for (int c = 0; c < 3; ++c) f.coeffs.col(c) = v.segment(c * num_basis, num_basis);
    return f;
  }
};

/// Displacement components as jets at the basis-evaluation point.
inline JetVec field_jets(const BasisEval& be, const DisplacementField& u) {
  if (u.num_basis() <= *std::max_element(be.indices.begin(), be.indices.end()))
    throw DomainError("displacement field does not match the patch");
  JetVec out;
  const int slots = deriv_slot_count(be.order);
  for (int c = 0; c < 3; ++c) {
    std::array<double, Jet::kCapacity> d{};
    for (int a = 0; a < be.size(); ++a) {
      const double coef = u.coeffs(be.indices[static_cast<std::size_t>(a)], c);
      if (coef == 0.0) continue;
      for (int k = 0; k < slots; ++k) d[static_cast<std::size_t>(k)] += coef * be.derivs(a, k);
    }
    out[static_cast<std::size_t>(c)] = Jet::from_derivatives(d, be.order);
  }
  return out;
}

namespace detail {

inline Jet zero_jet() { return Jet(Jet::kMaxOrder); }

inline Mat3 values(const JetMat& m) {
  Mat3 v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].value();
  return v;
}

inline Vec3 values(const JetVec& v) { return {v[0].value(), v[1].value(), v[2].value()}; }

/// G[i][j] = d_j f_i.
inline JetMat gradient(const SurfaceJets& s, const JetVec& f) {
  JetMat g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      g[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = tangential_derivative(s, f[static_cast<std::size_t>(i)], j);
  return g;
}

/// Row-wise divergence (div A)_r = sum_j d_j A_rj.
inline JetVec divergence(const SurfaceJets& s, const JetMat& A) {
  JetVec d{zero_jet(), zero_jet(), zero_jet()};
  for (int r = 0; r < 3; ++r)
    for (int j = 0; j < 3; ++j)
      d[static_cast<std::size_t>(r)] += tangential_derivative(s, A[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)], j);
  return d;
}

inline Jet divergence(const SurfaceJets& s, const JetVec& v) {
  Jet d = zero_jet();
  for (int j = 0; j < 3; ++j) d += tangential_derivative(s, v[static_cast<std::size_t>(j)], j);
  return d;
}

inline JetMat project_both(const JetMat& P, const JetMat& A) {
  JetMat PA, out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Jet acc = zero_jet();
      for (int k = 0; k < 3; ++k) acc += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * A[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      PA[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc;
    }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Jet acc = zero_jet();
      for (int k = 0; k < 3; ++k) acc += PA[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * P[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc;
    }
  return out;
}

inline JetVec project(const JetMat& P, const JetVec& v) {
  JetVec out{zero_jet(), zero_jet(), zero_jet()};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) out[static_cast<std::size_t>(i)] += P[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(k)];
  return out;
}

/// Isotropic in-plane law c1 * sym(A) + c2 * tr(A) I on jets.
inline JetMat isotropic(const JetMat& A, double c_sym, double c_tr) {
  const Jet tr = A[0][0] + A[1][1] + A[2][2];
  JetMat out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Jet v = (A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + A[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]) * (0.5 * c_sym);
      if (i == j) v += tr * c_tr;
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
    }
  return out;
}

/// S_ab = sum_i (d_b d_a u_i) n_i.
inline JetMat normal_hessian(const SurfaceJets& s, const JetMat& grad_u) {
  JetMat S;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      Jet acc = zero_jet();
      for (int i = 0; i < 3; ++i)
        acc += tangential_derivative(s, grad_u[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)], b) * s.n[static_cast<std::size_t>(i)];
      S[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = acc;
    }
  return S;
}

/// Stress-resultant fields as jets; orders fall with each derivative taken.
struct ResultantJets {
  JetMat grad_u;
  JetMat n_eff;  ///< P n^dir P
  JetMat m;      ///< P m^dir P
};

inline ResultantJets resultant_jets(const SurfaceJets& s, const JetVec& u, const Material& mat) {
  ResultantJets r;
  r.grad_u = gradient(s, u);
  const double cm = mat.membrane_rigidity();
  r.n_eff = project_both(s.P, isotropic(r.grad_u, cm * (1.0 - mat.nu), cm * mat.nu));
  const double db = mat.bending_rigidity();
  r.m = project_both(s.P, isotropic(normal_hessian(s, r.grad_u), -db * (1.0 - mat.nu), -db * mat.nu));
  return r;
}

inline Mat3 sym_part(const Mat3& A) { return 0.5 * (A + A.transpose()); }

}  // namespace detail

/// Directional gradient [grad u]_{ij} = d_j u_i.
inline Mat3 directional_gradient(const SurfaceJets& s, const JetVec& u) {
  if (u[0].order() < 1) throw DomainError("directional gradient needs first derivatives of u");
  return detail::values(detail::gradient(s, u));
}

/// w = H u - grad(u . n) = -(grad u)^T n.
inline Vec3 difference_vector(const SurfaceJets& s, const JetVec& u) {
  const Mat3 D = directional_gradient(s, u);
  return -D.transpose() * detail::values(s.n);
}

struct Strains {
  Mat3 membrane_dir;
  Mat3 membrane_cov;
  Mat3 bending_dir;  ///< symmetrized directional form
  Mat3 bending_cov;
};

inline Strains strains(const SurfaceJets& s, const JetVec& u) {
  if (u[0].order() < 2 || s.order < 1) throw DomainError("bending strain needs second derivatives of u and the normal");
  const JetMat G = detail::gradient(s, u);
  const Mat3 D = detail::values(G);
  const Mat3 P = detail::values(s.P);
  const Mat3 S = detail::values(detail::normal_hessian(s, G));
  Strains e;
  e.membrane_dir = detail::sym_part(D);
  e.membrane_cov = detail::sym_part(P * D);
  e.bending_dir = -detail::sym_part(S);
  e.bending_cov = -(P * S * P);
  return e;
}

/// Nonzero eigenvalues of an in-plane symmetric tensor, largest first.
inline std::pair<double, double> principal_values(const Mat3& A, const Vec3& n) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(detail::sym_part(A));
  std::array<double, 3> v{};
  int m = 0;
  bool dropped = false;
  for (int i = 0; i < 3; ++i) {
    if (!dropped && std::abs(es.eigenvectors().col(i).dot(n)) > 0.99) {
      dropped = true;
      continue;
    }
    v[static_cast<std::size_t>(m++)] = es.eigenvalues()(i);
  }
  if (!dropped) {
    // Degenerate eigenspace containing n: remove the eigenvalue closest to zero.
    std::array<double, 3> ev{es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
    std::sort(ev.begin(), ev.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    v = {ev[1], ev[2], 0.0};
  }
  return {std::max(v[0], v[1]), std::min(v[0], v[1])};
}

struct StressResultants {
  Mat3 m = Mat3::Zero();
  Mat3 n_eff = Mat3::Zero();
  Mat3 n_real = Mat3::Zero();
  bool has_shear = false;
  Vec3 q = Vec3::Zero();
  double m1 = 0.0, m2 = 0.0;
  double n1 = 0.0, n2 = 0.0;  ///< principal values of n_eff
};

/// Resultants at the jet point. q is filled when third derivatives are available.
inline StressResultants stress_resultants(const SurfaceJets& s, const JetVec& u, const Material& mat, bool need_shear = false) {
  if (u[0].order() < 2 || s.order < 1) throw DomainError("stress resultants need second derivatives of u and the normal");
  const bool shear_ok = u[0].order() >= 3 && s.order >= 2;
  if (need_shear && !shear_ok) throw DomainError("shear force needs third derivatives of u and the mapping");
  const detail::ResultantJets r = detail::resultant_jets(s, u, mat);
  StressResultants out;
  out.m = detail::values(r.m);
  out.n_eff = detail::values(r.n_eff);
  out.n_real = out.n_eff + detail::values(s.H) * out.m;
  const Vec3 n = detail::values(s.n);
  std::tie(out.m1, out.m2) = principal_values(out.m, n);
  std::tie(out.n1, out.n2) = principal_values(out.n_eff, n);
  if (shear_ok) {
    out.has_shear = true;
    out.q = detail::values(s.P) * detail::values(detail::divergence(s, r.m));
  }
  return out;
}

/// Strong-form operator L(u); equilibrium reads L(u) = -f.
inline Vec3 strong_form_operator(const SurfaceJets& s, const JetVec& u, const Material& mat) {
  if (u[0].order() < 4 || s.order < 3) throw DomainError("strong form needs fourth derivatives of u and the mapping");
  const detail::ResultantJets r = detail::resultant_jets(s, u, mat);
  const JetVec div_m = detail::divergence(s, r.m);
  const JetVec q = detail::project(s.P, div_m);
  const double div_q = detail::divergence(s, q).value();
  const Vec3 div_n = detail::values(detail::divergence(s, r.n_eff));
  const Vec3 dm = detail::values(div_m);
  const Mat3 H = detail::values(s.H);
  const Mat3 m = detail::values(r.m);
  const std::array<Mat3, 3> dH = weingarten_derivatives(s);
  Vec3 last = Vec3::Zero();
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) last(j) += dH[static_cast<std::size_t>(i)](j, k) * m(k, i);
  return div_n + detail::values(s.n) * div_q + 2.0 * H * dm + last;
}

/// Effective boundary forces, bending moment and rotations at a boundary point.
struct BoundaryForces {
  Vec3 t = Vec3::Zero();        ///< boundary tangent
  Vec3 conormal = Vec3::Zero();  ///< outward co-normal
  double p_t = 0.0, p_conormal = 0.0, p_n = 0.0;  ///< physical decomposition
  double pt_eff = 0.0, pconormal_eff = 0.0, pn_eff = 0.0;
  double m_t = 0.0;         ///< (m n_d) . n_d, conjugate to omega_t
  double m_conormal = 0.0;  ///< (m n_d) . t
  double omega_t = 0.0;
  double omega_conormal = 0.0;
  /// Full traction n_real n_d + (q . n_d) n + m_conormal H t + d_t(m_conormal) n.
  Vec3 traction = Vec3::Zero();
};

inline BoundaryForces boundary_forces(const SurfaceJets& s, const JetVec& u, const Material& mat, Edge edge) {
  if (u[0].order() < 3 || s.order < 2) throw DomainError("boundary forces need third derivatives of u and the mapping");
  const int along = edge_direction(edge);
  const int across = 1 - along;
  // Tangent field t = +-x_along / |x_along|, oriented so n x t points outward.
  JetVec xa, xc;
  for (int c = 0; c < 3; ++c) {
    xa[static_cast<std::size_t>(c)] = s.x[static_cast<std::size_t>(c)].d(along);
    xc[static_cast<std::size_t>(c)] = s.x[static_cast<std::size_t>(c)].d(across);
  }
  const Jet inv_len = dot(xa, xa).sqrt().reciprocal();
  JetVec t;
  for (int c = 0; c < 3; ++c) t[static_cast<std::size_t>(c)] = xa[static_cast<std::size_t>(c)] * inv_len;
  const Vec3 n0 = detail::values(s.n);
  if (n0.cross(detail::values(t)).dot(detail::values(xc)) * edge_outward_sign(edge) < 0.0)
    for (auto& c : t) c = -c;
  const JetVec nd = cross(s.n, t);

  const detail::ResultantJets r = detail::resultant_jets(s, u, mat);
  const JetVec m_nd = [&] {
    JetVec v{detail::zero_jet(), detail::zero_jet(), detail::zero_jet()};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        v[static_cast<std::size_t>(i)] += r.m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * nd[static_cast<std::size_t>(j)];
    return v;
  }();
  const Jet m_conormal = dot(m_nd, t);
  double dt_mc = 0.0;
  for (int i = 0; i < 3; ++i) dt_mc += tangential_derivative(s, m_conormal, i).value() * t[static_cast<std::size_t>(i)].value();

  const Mat3 H = detail::values(s.H);
  const Mat3 m = detail::values(r.m);
  const Mat3 n_real = detail::values(r.n_eff) + H * m;
  const Vec3 q = detail::values(s.P) * detail::values(detail::divergence(s, r.m));
  const Vec3 tv = detail::values(t), ndv = detail::values(nd);
  const Vec3 w = -detail::values(r.grad_u).transpose() * n0;

  BoundaryForces b;
  b.t = tv;
  b.conormal = ndv;
  const Vec3 nn = n_real * ndv;
  b.p_t = nn.dot(tv);
  b.p_conormal = nn.dot(ndv);
  b.p_n = q.dot(ndv);
  b.m_t = (m * ndv).dot(ndv);
  b.m_conormal = m_conormal.value();
  b.pt_eff = b.p_t + (H * tv).dot(tv) * b.m_conormal;
  b.pconormal_eff = b.p_conormal + (H * tv).dot(ndv) * b.m_conormal;
  b.pn_eff = b.p_n + dt_mc;
  b.omega_t = w.dot(ndv);
  b.omega_conormal = w.dot(tv);
  b.traction = nn + b.p_n * n0 + b.m_conormal * (H * tv) + dt_mc * n0;
  return b;
}

/// Convenience: jets of geometry and field at one point of a surface.
struct PointJets {
  BasisEval basis;
  GeometryEval geometry;
  SurfaceJets surface;
  JetVec u;
};

inline PointJets point_jets(const ShellSurface& surf, const DisplacementField& u, int elem, ParamPoint pt, int order) {
  PointJets p;
  p.basis = surf.eval_basis(elem, pt, order);
  p.geometry = surf.eval_geometry(p.basis);
  p.surface = surface_jets(p.geometry);
  p.u = field_jets(p.basis, u);
  return p;
}

}  // namespace tdcshell
