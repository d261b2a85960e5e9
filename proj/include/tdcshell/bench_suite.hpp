#pragma once

#include "tdcshell/assembly.hpp"
#include "tdcshell/common.hpp"
#include "tdcshell/nurbs.hpp"
#include "tdcshell/quadrature.hpp"
#include "tdcshell/shell_core.hpp"
#include "tdcshell/surface.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace tdcshell {

/// Analytic reference fields of the manufactured flat-shell problem at (r, s).
struct ReferenceFields {
  Vec3 u = Vec3::Zero();
  Mat3 n_real = Mat3::Zero();
  Mat3 m = Mat3::Zero();
  Vec3 q = Vec3::Zero();
};

/// What a case is compared against.
enum class ReferenceKind { None, AnalyticField, MaxVerticalDisplacement, LoadPointDisplacement, StoredEnergy };

/// A benchmark problem at a given degree and mesh.
struct BenchmarkCase {
  std::string name;
  ShellSurface surface;
  Material material;
  LoadSet loads;
  std::vector<BoundaryCondition> bcs;
  ReferenceKind kind = ReferenceKind::AnalyticField;
  double reference_value = 0.0;
  std::function<ReferenceFields(ParamPoint)> reference_fields;  ///< analytic cases only
  std::function<Vec3(const Vec3& x, ParamPoint)> load_field;    ///< f for the residual
  std::vector<PointSupport> pins;
};

/// Plain-text description a case is rebuilt from (see CaseSpec::to_text).
struct CaseSpec {
  std::string name = "flat_shell";
  Material material;
  Vec3 load = Vec3::Zero();              ///< constant area load (not used by flat_shell)
  std::optional<PointLoad> point_load;   ///< pinched cylinder
  std::array<BcType, 4> bc{BcType::Free, BcType::Free, BcType::Free, BcType::Free};  ///< S, E, N, W
  std::array<std::array<bool, 3>, 4> bc_components{{{true, false, true}, {true, false, true}, {true, false, true}, {true, false, true}}};
  Vec3 normal{-0.25, -std::sqrt(3.0) / 2.0, std::sqrt(3.0) / 4.0};  ///< flat_shell orientation
  std::vector<PointSupport> pins;
  std::optional<NurbsPatch> patch;  ///< user geometry; replaces the named case's surface, used as given
};

inline const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names{"flat_shell", "scordelis_lo", "pinched_cylinder", "flower"};
  return names;
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Rotation whose third column is `n`; the first two columns span the shell plane.
inline Mat3 frame_for_normal(const Vec3& n_in) {
  const Vec3 n = n_in.normalized();
  const Vec3 seed = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = (seed - seed.dot(n) * n).normalized();
  const Vec3 e2 = n.cross(e1);
  Mat3 R;
  R << e1, e2, n;
  return R;
}

/// Refines a Bezier patch to degree p and n spans per direction.
inline NurbsPatch refine_patch(NurbsPatch patch, int p, int n) {
  if (p < 1 || n < 1) throw DomainError("degree and mesh size must be positive");
  patch.elevate_bezier(0, p);
  patch.elevate_bezier(1, p);
  patch.refine_uniform(0, n);
  patch.refine_uniform(1, n);
  return patch;
}

/// Unit square in the plane with normal `n`: x = r e1 + s e2.
inline NurbsPatch flat_patch(const Vec3& n, int p, int n_el) {
  const Mat3 R = frame_for_normal(n);
  const Vec3 e1 = R.col(0), e2 = R.col(1);
  std::vector<Vec3> pts{Vec3::Zero(), e1, e2, e1 + e2};
  return refine_patch(NurbsPatch::bezier(1, 1, pts, {1, 1, 1, 1}), p, n_el);
}

/// Cylinder segment with axis along y: angle range [a0, a1] (from +z towards +x), length L.
inline NurbsPatch cylinder_patch(double R, double a0, double a1, double L, int p, int n_el) {
  const double half = 0.5 * (a1 - a0);
  const double mid = 0.5 * (a0 + a1);
  const double w = std::cos(half);
  auto at = [](double r, double a) { return Vec3(r * std::sin(a), 0.0, r * std::cos(a)); };
  std::vector<Vec3> pts;
  std::vector<double> wts;
  for (int j = 0; j < 2; ++j) {
    const Vec3 off(0.0, j * L, 0.0);
    pts.push_back(at(R, a0) + off);
    pts.push_back(at(R / w, mid) + off);
    pts.push_back(at(R, a1) + off);
    wts.insert(wts.end(), {1.0, w, 1.0});
  }
  return refine_patch(NurbsPatch::bezier(2, 1, pts, wts), p, n_el);
}

/// Flower-shaped shell: x = ((A - C) cos th, (A - C) sin th, 1 - s^2), C = s (B + 0.3 cos 6 th), th = pi (r + 1).
struct FlowerGeometry {
  double A = 2.3;
  double B = 0.8;
  double wave = 0.3;

  GeometryEval operator()(ParamPoint pt, int order) const {
    const double pi = std::numbers::pi;
    const double r = pt.u, s = pt.v;
    const double th = pi * (r + 1.0);
    // d^a/dr^a of g(th) = B + 0.3 cos 6 th, cos th, sin th.
    auto g = [&](int a) { return a == 0 ? B + wave * std::cos(6.0 * th) : wave * std::pow(6.0 * pi, a) * std::cos(6.0 * th + a * pi / 2.0); };
    auto c = [&](int a) { return std::pow(pi, a) * std::cos(th + a * pi / 2.0); };
    auto sn = [&](int a) { return std::pow(pi, a) * std::sin(th + a * pi / 2.0); };
    // d^a_r d^b_s F, F = A - s g.
    auto F = [&](int a, int b) {
      if (b == 0) return a == 0 ? A - s * g(0) : -s * g(a);
      if (b == 1) return -g(a);
      return 0.0;
    };
    GeometryEval ge;
    ge.order = order;
    ge.derivs.assign(static_cast<std::size_t>(deriv_slot_count(order)), Vec3::Zero());
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b) {
        double x = 0.0, y = 0.0;
        for (int k = 0; k <= a; ++k) {
          const double bin = binomial(a, k);
          x += bin * F(k, b) * c(a - k);
          y += bin * F(k, b) * sn(a - k);
        }
        double z = 0.0;
        if (a == 0) z = b == 0 ? 1.0 - s * s : (b == 1 ? -2.0 * s : (b == 2 ? -2.0 : 0.0));
        ge.derivs[static_cast<std::size_t>(deriv_slot(a, b))] = Vec3(x, y, z);
      }
    return ge;
  }
};

/// Discretization space for the flower: periodic in r on [-1, 1], open in s on [-1, 1].
/// Control points interpolate nothing; they are the exact map sampled at Greville abscissae for plotting.
inline NurbsPatch flower_space(int p, int n_el) {
  const KnotVector ku = KnotVector::periodic_uniform(p, n_el, -1.0, 1.0);
  const KnotVector kv = KnotVector::open_uniform(p, n_el, -1.0, 1.0);
  const FlowerGeometry geo;
  auto greville = [](const KnotVector& k, int i) {
    double s = 0.0;
    for (int j = 1; j <= k.degree(); ++j) s += k.knot(i + j);
    return s / k.degree();
  };
  std::vector<Vec3> pts;
  for (int j = 0; j < kv.count(); ++j)
    for (int i = 0; i < ku.count(); ++i) {
      double r = greville(ku, i);
      if (r > 1.0) r -= 2.0;
      if (r < -1.0) r += 2.0;
      pts.push_back(geo({r, greville(kv, j)}, 0).x());
    }
  return NurbsPatch(ku, kv, pts, std::vector<double>(pts.size(), 1.0));
}

// ---------------------------------------------------------------------------
// Cases
// ---------------------------------------------------------------------------

inline CaseSpec default_spec(const std::string& name) {
  CaseSpec c;
  c.name = name;
  if (name == "flat_shell") {
    c.material = Material(10000.0, 0.3, 0.01);
    c.bc = {BcType::SimplySupported, BcType::SimplySupported, BcType::SimplySupported, BcType::SimplySupported};
  } else if (name == "scordelis_lo") {
    c.material = Material(4.32e8, 0.0, 0.25);
    c.load = Vec3(0.0, 0.0, -90.0);
    // u runs along the arc, v along the axis: diaphragms at y = 0 (south) and y = L (north).
    c.bc = {BcType::Diaphragm, BcType::Free, BcType::Diaphragm, BcType::Free};
    // The diaphragms leave axial translation free; the crown midpoint does not move axially by symmetry.
    c.pins = {PointSupport{{0.5, 0.5}, 1}};
  } else if (name == "pinched_cylinder") {
    c.material = Material(3e6, 0.3, 3.0);
    c.point_load = PointLoad{{0.0, 0.0}, Vec3(0.0, 0.0, -0.25)};
    // South y = 0 (mid-length plane), north y = L/2 (diaphragm), west top line x = 0, east z = 0.
    c.bc = {BcType::Symmetry, BcType::Symmetry, BcType::Diaphragm, BcType::Symmetry};
  } else if (name == "flower") {
    c.material = Material(1e5, 0.3, 0.1);
    c.load = Vec3(1.0, 2.0, -10.0);
    c.bc = {BcType::Clamped, BcType::Free, BcType::Clamped, BcType::Free};
  } else {
    throw DomainError("unknown case '" + name + "'");
  }
  return c;
}

namespace detail {

/// Flat-shell manufactured fields in plane coordinates (r, s), plane basis e1, e2, normal n.
struct FlatManufactured {
  Material mat;
  Mat3 R;  ///< columns e1, e2, n

  ReferenceFields fields(ParamPoint pt) const {
    const double pi = std::numbers::pi;
    const double sr = std::sin(pi * pt.u), cr = std::cos(pi * pt.u), ss = std::sin(pi * pt.v), cs = std::cos(pi * pt.v);
    const double phi = sr * ss, phi_r = pi * cr * ss, phi_s = pi * sr * cs;
    const double phi_rr = -pi * pi * phi, phi_ss = -pi * pi * phi, phi_rs = pi * pi * cr * cs;
    const double un_scale = -1.0 / (4.0 * std::pow(pi, 4));
    const Vec3 e1 = R.col(0), e2 = R.col(1), n = R.col(2);
    ReferenceFields f;
    f.u = 0.25 * phi * (e1 + e2) + un_scale * phi * n;
    // Membrane: a = phi / 4 in both plane components.
    Mat2 eps;
    eps << 0.25 * phi_r, 0.125 * (phi_r + phi_s), 0.125 * (phi_r + phi_s), 0.25 * phi_s;
    const Mat2 n2 = mat.membrane_rigidity() * ((1.0 - mat.nu) * eps + mat.nu * eps.trace() * Mat2::Identity());
    // Bending: curvature K = grad grad u_n.
    Mat2 K;
    K << un_scale * phi_rr, un_scale * phi_rs, un_scale * phi_rs, un_scale * phi_ss;
    const Mat2 m2 = -mat.bending_rigidity() * ((1.0 - mat.nu) * K + mat.nu * K.trace() * Mat2::Identity());
    Eigen::Matrix<double, 3, 2> E;
    E << e1, e2;
    f.n_real = E * n2 * E.transpose();
    f.m = E * m2 * E.transpose();
    // q = -D grad(lap u_n) = 2 pi^2 D grad u_n.
    f.q = 2.0 * pi * pi * mat.bending_rigidity() * un_scale * (phi_r * e1 + phi_s * e2);
    return f;
  }

  Vec3 load(ParamPoint pt) const {
    const double pi = std::numbers::pi;
    const double sr = std::sin(pi * pt.u), cr = std::cos(pi * pt.u), ss = std::sin(pi * pt.v), cs = std::cos(pi * pt.v);
    const double phi = sr * ss;
    const double phi_rr = -pi * pi * phi, phi_ss = -pi * pi * phi, phi_rs = pi * pi * cr * cs;
    const double cm = mat.membrane_rigidity(), nu = mat.nu, a = 0.25;
    const double div1 = cm * a * (phi_rr + nu * phi_rs + 0.5 * (1.0 - nu) * (phi_rs + phi_ss));
    const double div2 = cm * a * (0.5 * (1.0 - nu) * (phi_rr + phi_rs) + phi_ss + nu * phi_rs);
    const double fn = -mat.bending_rigidity() * phi;
    return -(div1 * R.col(0) + div2 * R.col(1)) + fn * R.col(2);
  }
};

}  // namespace detail

/// Builds the case of `spec` at degree p with n spans per side.
inline BenchmarkCase make_case(const CaseSpec& spec, int p, int n) {
  spec.material.validate();
  const double pi = std::numbers::pi;
  BenchmarkCase bc{spec.name, ShellSurface(NurbsPatch::bezier(1, 1, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}, {1, 1, 1, 1})),
                   spec.material, {}, {}, ReferenceKind::AnalyticField, 0.0, {}, {}, {}};
  if (spec.patch) {
    bc.surface = ShellSurface(*spec.patch);
    bc.kind = ReferenceKind::None;
  } else if (spec.name == "flat_shell") {
    const detail::FlatManufactured mf{spec.material, frame_for_normal(spec.normal)};
    bc.surface = ShellSurface(flat_patch(spec.normal, p, n));
    bc.reference_fields = [mf](ParamPoint pt) { return mf.fields(pt); };
    bc.load_field = [mf](const Vec3&, ParamPoint pt) { return mf.load(pt); };
    bc.kind = ReferenceKind::AnalyticField;
    bc.reference_value = 1.0 / (4.0 * std::pow(pi, 4));
  } else if (spec.name == "scordelis_lo") {
    const double a = 40.0 * pi / 180.0;
    bc.surface = ShellSurface(cylinder_patch(25.0, -a, a, 50.0, p, n));
    bc.kind = ReferenceKind::MaxVerticalDisplacement;
    bc.reference_value = 0.3024;
  } else if (spec.name == "pinched_cylinder") {
    bc.surface = ShellSurface(cylinder_patch(300.0, 0.0, pi / 2.0, 300.0, p, n));
    bc.kind = ReferenceKind::LoadPointDisplacement;
    bc.reference_value = 1.82488e-5;
  } else if (spec.name == "flower") {
    bc.surface = ShellSurface(flower_space(p, n), FlowerGeometry{});
    bc.kind = ReferenceKind::StoredEnergy;
    bc.reference_value = 1.7635958;
  } else {
    throw DomainError("unknown case '" + spec.name + "'");
  }
  if (!bc.load_field) {
    const Vec3 f = spec.load;
    bc.load_field = [f](const Vec3&, ParamPoint) { return f; };
  }
  if (bc.kind == ReferenceKind::AnalyticField || spec.load.squaredNorm() > 0.0) bc.loads.distributed = bc.load_field;
  if (spec.point_load) bc.loads.points.push_back(*spec.point_load);
  bc.pins = spec.pins;
  for (std::size_t k = 0; k < 4; ++k)
    if (spec.bc[k] != BcType::Free) bc.bcs.push_back({kAllEdges[k], spec.bc[k], spec.bc_components[k]});
  return bc;
}

inline BenchmarkCase case_flat_shell(int p, int n) { return make_case(default_spec("flat_shell"), p, n); }
inline BenchmarkCase case_scordelis_lo(int p, int n) { return make_case(default_spec("scordelis_lo"), p, n); }
inline BenchmarkCase case_pinched_cylinder(int p, int n) { return make_case(default_spec("pinched_cylinder"), p, n); }
inline BenchmarkCase case_flower(int p, int n) { return make_case(default_spec("flower"), p, n); }

// ---------------------------------------------------------------------------
// Error measures and extractors
// ---------------------------------------------------------------------------

struct L2Errors {
  double u = 0.0, n = 0.0, m = 0.0, q = 0.0;
};

/// Relative L2 errors of u, n_real, m and q against the case's analytic fields.
inline L2Errors l2_error(const BenchmarkCase& c, const DisplacementField& uh, int points = 0) {
  if (!c.reference_fields) throw DomainError("case '" + c.name + "' has no analytic reference field");
  const NurbsPatch& patch = c.surface.patch();
  const QuadratureRule rule = gauss_rule(points > 0 ? points : default_quadrature_points(patch));
  double eu = 0, ru = 0, en = 0, rn = 0, em = 0, rm = 0, eq = 0, rq = 0;
  for (int e = 0; e < patch.num_elements(); ++e) {
    const ElementBounds b = patch.element_bounds(e);
    for (int q = 0; q < rule.size(); ++q) {
      const ParamPoint pt = rule.map(q, b);
      const PointJets pj = point_jets(c.surface, uh, e, pt, 3);
      const double dA = rule.scaled_weight(q, b) * pj.surface.area.value();
      const StressResultants sr = stress_resultants(pj.surface, pj.u, c.material, true);
      const ReferenceFields ref = c.reference_fields(pt);
      const Vec3 u{pj.u[0].value(), pj.u[1].value(), pj.u[2].value()};
      eu += dA * (u - ref.u).squaredNorm();
      ru += dA * ref.u.squaredNorm();
      en += dA * (sr.n_real - ref.n_real).squaredNorm();
      rn += dA * ref.n_real.squaredNorm();
      em += dA * (sr.m - ref.m).squaredNorm();
      rm += dA * ref.m.squaredNorm();
      eq += dA * (sr.q - ref.q).squaredNorm();
      rq += dA * ref.q.squaredNorm();
    }
  }
  auto ratio = [](double e, double r) { return r > 0.0 ? std::sqrt(e / r) : std::sqrt(e); };
  return {ratio(eu, ru), ratio(en, rn), ratio(em, rm), ratio(eq, rq)};
}

/// Relative L2 norm of the equilibrium residual L(u_h) + f over the whole surface.
///
/// Element contributions are combined as a root of the summed squares; the
/// literal sum of per-element norms is returned through `element_sum` if given.
inline double residual_error(const BenchmarkCase& c, const DisplacementField& uh, double* element_sum = nullptr, int points = 0) {
  const NurbsPatch& patch = c.surface.patch();
  if (std::min(patch.degree_u(), patch.degree_v()) < 4)
    throw DomainError("residual error needs fourth derivatives: degree >= 4 required");
  const QuadratureRule rule = gauss_rule(points > 0 ? points : default_quadrature_points(patch) + 1);
  double num = 0.0, den = 0.0;
  std::vector<double> per_elem(static_cast<std::size_t>(patch.num_elements()), 0.0);
  for (int e = 0; e < patch.num_elements(); ++e) {
    const ElementBounds b = patch.element_bounds(e);
    for (int q = 0; q < rule.size(); ++q) {
      const ParamPoint pt = rule.map(q, b);
      const PointJets pj = point_jets(c.surface, uh, e, pt, 4);
      const double dA = rule.scaled_weight(q, b) * pj.surface.area.value();
      const Vec3 f = c.load_field(pj.geometry.x(), pt);
      const Vec3 r = strong_form_operator(pj.surface, pj.u, c.material) + f;
      per_elem[static_cast<std::size_t>(e)] += dA * r.squaredNorm();
      den += dA * f.squaredNorm();
    }
  }
  for (double v : per_elem) num += v;
  if (den == 0.0) {
    if (element_sum) *element_sum = 0.0;
    return num == 0.0 ? 0.0 : std::sqrt(num);
  }
  if (element_sum) {
    double s = 0.0;
    for (double v : per_elem) s += std::sqrt(v / den);
    *element_sum = s;
  }
  return std::sqrt(num / den);
}

/// Displacement at a parametric point.
inline Vec3 displacement_at(const ShellSurface& surf, const DisplacementField& u, ParamPoint pt) {
  const int e = surf.patch().locate(pt);
  const BasisEval be = surf.eval_basis(e, pt, 0);
  Vec3 out = Vec3::Zero();
  for (int a = 0; a < be.size(); ++a) out += be.value(a) * u.coeffs.row(be.indices[static_cast<std::size_t>(a)]).transpose();
  return out;
}

/// Maximum |u_z| over a (2n+1)^2 parametric sample grid including the edges.
inline double max_vertical_displacement(const ShellSurface& surf, const DisplacementField& u, int samples) {
  const NurbsPatch& patch = surf.patch();
  const double u0 = patch.knots_u().front(), u1 = patch.knots_u().back();
  const double v0 = patch.knots_v().front(), v1 = patch.knots_v().back();
  double mx = 0.0;
  for (int j = 0; j <= samples; ++j)
    for (int i = 0; i <= samples; ++i) {
      const ParamPoint pt{u0 + (u1 - u0) * i / samples, v0 + (v1 - v0) * j / samples};
      mx = std::max(mx, std::abs(displacement_at(surf, u, pt).z()));
    }
  return mx;
}

// ---------------------------------------------------------------------------
// Runs and studies
// ---------------------------------------------------------------------------

struct RunOptions {
  bool residual = true;     ///< compute the residual error when p >= 4 (flower only by default)
  bool timing = false;      ///< record wall time in the report
  AssemblyOptions assembly;
  SolveOptions solve;
};

enum class FailureKind { None, Input, Singular, Numerical };

/// One (p, n) cell of a study; unset metrics are NaN.
struct ReportRow {
  std::string case_name;
  int p = 0, n = 0;
  double h = 0.0;
  int dofs = 0;
  double err_u = NAN, err_n = NAN, err_m = NAN, err_q = NAN;
  double residual = NAN;
  double uz_max = NAN, u_load = NAN, energy = NAN;
  double runtime_s = NAN;
  bool failed = false;
  FailureKind failure = FailureKind::None;
  std::string error;
};

struct RunOutput {
  ReportRow row;
  BenchmarkCase bench;
  SolveResult solution;
};

inline RunOutput run_case(const CaseSpec& spec, int p, int n, const RunOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out{ReportRow{}, make_case(spec, p, n), SolveResult{}};
  const BenchmarkCase& c = out.bench;
  ReportRow& r = out.row;
  r.case_name = spec.name;
  r.p = p;
  r.n = n;
  if (spec.patch) {
    r.p = std::max(spec.patch->degree_u(), spec.patch->degree_v());
    r.n = std::max(spec.patch->num_elements_u(), spec.patch->num_elements_v());
  }
  r.h = 1.0 / r.n;
  out.solution = assemble_and_solve(c.surface, c.material, c.loads, c.bcs, opt.assembly, opt.solve, c.pins);
  const DisplacementField& u = out.solution.u;
  r.dofs = out.solution.dofs;
  r.energy = out.solution.energy;
  switch (c.kind) {
    case ReferenceKind::AnalyticField: {
      const L2Errors e = l2_error(c, u);
      r.err_u = e.u;
      r.err_n = e.n;
      r.err_m = e.m;
      r.err_q = e.q;
      // Center normal displacement (location of the analytic maximum).
      const Vec3 n0 = frame_for_normal(spec.normal).col(2);
      r.uz_max = std::abs(displacement_at(c.surface, u, {0.5, 0.5}).dot(n0));
      break;
    }
    case ReferenceKind::MaxVerticalDisplacement:
      r.uz_max = max_vertical_displacement(c.surface, u, 2 * n);
      break;
    case ReferenceKind::LoadPointDisplacement:
      r.u_load = -displacement_at(c.surface, u, c.loads.points.at(0).at).z();
      break;
    case ReferenceKind::StoredEnergy:
    case ReferenceKind::None:
      break;
  }
  const int pmin = std::min(c.surface.patch().degree_u(), c.surface.patch().degree_v());
  if (opt.residual && pmin >= 4 && c.loads.points.empty() && c.kind != ReferenceKind::MaxVerticalDisplacement && c.kind != ReferenceKind::LoadPointDisplacement)
    r.residual = residual_error(c, u);
  if (opt.timing) r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Runs `count` independent jobs on up to `jobs` threads; results are stored by index.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

struct ConvergenceReport {
  std::vector<ReportRow> rows;  ///< ordered by (p, n) as requested, failures included with failed = true

  /// Least-squares log-log slope of metric vs h over the finest three successful meshes of degree p.
  double slope(int p, double ReportRow::*metric, int last = 3) const {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows)
      if (r.p == p && !r.failed && std::isfinite(r.*metric) && r.*metric > 0.0) pts.emplace_back(std::log(r.h), std::log(r.*metric));
    std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.first > b.first; });
    if (static_cast<int>(pts.size()) > last) pts.erase(pts.begin(), pts.end() - last);
    if (pts.size() < 2) return NAN;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double k = static_cast<double>(pts.size());
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
  }

  std::vector<ReportRow> rows_for(int p) const {
    std::vector<ReportRow> out;
    for (const auto& r : rows)
      if (r.p == p && !r.failed) out.push_back(r);
    return out;
  }
};

inline ConvergenceReport convergence_study(const CaseSpec& spec, const std::vector<int>& ps, const std::vector<int>& ns,
                                           int jobs = 1, const RunOptions& opt = {}) {
  std::vector<std::pair<int, int>> cells;
  for (int p : ps)
    for (int n : ns) cells.emplace_back(p, n);
  ConvergenceReport rep;
  rep.rows.resize(cells.size());
  parallel_for(static_cast<int>(cells.size()), jobs, [&](int i) {
    const auto [p, n] = cells[static_cast<std::size_t>(i)];
    auto fail = [&](FailureKind kind, const char* what) {
      ReportRow r;
      r.case_name = spec.name;
      r.p = p;
      r.n = n;
      r.h = 1.0 / n;
      r.failed = true;
      r.failure = kind;
      r.error = what;
      rep.rows[static_cast<std::size_t>(i)] = r;
    };
    try {
      rep.rows[static_cast<std::size_t>(i)] = run_case(spec, p, n, opt).row;
    } catch (const SingularSystemError& e) {
      fail(FailureKind::Singular, e.what());
    } catch (const DomainError& e) {
      fail(FailureKind::Input, e.what());
    } catch (const std::exception& e) {
      fail(FailureKind::Numerical, e.what());
    }
  });
  return rep;
}

// ---------------------------------------------------------------------------
// Text output
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* kCsvHeader = "case,p,n,h,dofs,err_u,err_n,err_m,err_q,residual,uz_max,u_load,energy,runtime_s";

inline std::string csv_row(const ReportRow& r) {
  std::ostringstream os;
  os << r.case_name << ',' << r.p << ',' << r.n << ',' << format_double(r.h) << ',';
  if (!r.failed) os << r.dofs;
  for (double v : {r.err_u, r.err_n, r.err_m, r.err_q, r.residual, r.uz_max, r.u_load, r.energy, r.runtime_s})
    os << ',' << format_double(v);
  return os.str();
}

/// Failed cells are omitted from the CSV; they are reported separately by the caller.
inline std::string csv_report(const ConvergenceReport& rep) {
  std::string s = std::string(kCsvHeader) + "\n";
  for (const auto& r : rep.rows)
    if (!r.failed) s += csv_row(r) + "\n";
  return s;
}

/// Field samples "r s x y z ux uy uz m1 m2 q1 q2 q3" on a (g+1)^2 uniform parametric grid.
inline std::string field_samples(const BenchmarkCase& c, const DisplacementField& u, int g) {
  const NurbsPatch& patch = c.surface.patch();
  const double u0 = patch.knots_u().front(), u1 = patch.knots_u().back();
  const double v0 = patch.knots_v().front(), v1 = patch.knots_v().back();
  std::string s = "r s x y z ux uy uz m1 m2 q1 q2 q3\n";
  for (int j = 0; j <= g; ++j)
    for (int i = 0; i <= g; ++i) {
      const ParamPoint pt{u0 + (u1 - u0) * i / g, v0 + (v1 - v0) * j / g};
      const PointJets pj = point_jets(c.surface, u, patch.locate(pt), pt, 3);
      const StressResultants sr = stress_resultants(pj.surface, pj.u, c.material, true);
      const Vec3 x = pj.geometry.x();
      const double vals[] = {pt.u, pt.v, x.x(), x.y(), x.z(), pj.u[0].value(), pj.u[1].value(), pj.u[2].value(),
                             sr.m1, sr.m2, sr.q.x(), sr.q.y(), sr.q.z()};
      for (std::size_t k = 0; k < std::size(vals); ++k) s += (k ? " " : "") + format_double(vals[k]);
      s += "\n";
    }
  return s;
}

}  // namespace tdcshell
