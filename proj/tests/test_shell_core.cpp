#include "fixtures.hpp"
#include "tdcshell/shell_core.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tdcshell;

namespace {

constexpr double kPi = std::numbers::pi;
const Vec3 kFlatNormal(-0.25, -std::sqrt(3.0) / 2.0, std::sqrt(3.0) / 4.0);

/// phi = sin(pi r) sin(pi s) as a jet of the given order.
Jet phi_jet(ParamPoint pt, int order) {
  std::array<double, Jet::kCapacity> d{};
  for (int a = 0; a <= order; ++a)
    for (int b = 0; a + b <= order; ++b)
      d[static_cast<std::size_t>(Jet::index(a, b))] =
          std::pow(kPi, a + b) * std::sin(kPi * pt.u + a * kPi / 2) * std::sin(kPi * pt.v + b * kPi / 2);
  return Jet::from_derivatives(d, order);
}

/// Vector field sum_k c_k(r, s) dir_k with scalar jets c_k.
JetVec combine(const std::vector<std::pair<Jet, Vec3>>& terms, int order) {
  JetVec u = make_jet_vec(order);
  for (const auto& [c, dir] : terms)
    for (int i = 0; i < 3; ++i) {
      Jet t = c;
      t *= dir(i);
      u[static_cast<std::size_t>(i)] += t;
    }
  return u;
}

JetVec constant_field(const Vec3& v, int order) {
  return {Jet::constant(v.x(), order), Jet::constant(v.y(), order), Jet::constant(v.z(), order)};
}

struct FlatPoint {
  Mat3 R;  // columns e1, e2, n
  SurfaceJets s;
};

/// Flat shell plane x = r e1 + s e2 at (r, s), jets of the requested order.
FlatPoint flat_point(ParamPoint pt, int order) {
  const NurbsPatch patch = flat_patch(kFlatNormal, 4, 1);
  return {frame_for_normal(kFlatNormal), surface_jets(patch.eval_geometry(0, pt, order))};
}

PointJets random_cylinder_point(std::uint64_t seed, int order) {
  const NurbsPatch cyl = cylinder_patch(2.0, -0.6, 0.6, 3.0, 4, 2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  DisplacementField u(cyl.num_basis());
  for (int i = 0; i < cyl.num_basis(); ++i) u.coeffs.row(i) = Eigen::RowVector3d(c(rng), c(rng), c(rng));
  const ShellSurface surf(cyl);
  return point_jets(surf, u, 1, {0.7, 0.3}, order);
}

}  // namespace

TEST(Material, DerivedConstants) {
  const Material m(10000.0, 0.3, 0.01);
  EXPECT_NEAR(m.bending_rigidity(), 10000.0 * 1e-6 / (12.0 * 0.91), 1e-18);
  EXPECT_NEAR(m.bending_rigidity(), 9.158e-4, 1e-7);
  const Material zero_nu(4.32e8, 0.0, 0.25);
  EXPECT_EQ(zero_nu.lambda(), 0.0);
  EXPECT_DOUBLE_EQ(zero_nu.mu(), 0.5 * 4.32e8);
  EXPECT_THROW(Material(0.0, 0.3, 1.0), DomainError);
  EXPECT_THROW(Material(1.0, 0.5, 1.0), DomainError);
  EXPECT_THROW(Material(1.0, 0.3, -1.0), DomainError);
}

TEST(DifferenceVector, RigidTranslationIsZero) {
  const PointJets pj = random_cylinder_point(1, 3);
  EXPECT_LE(difference_vector(pj.surface, constant_field(Vec3(1, -2, 3), 3)).norm(), 1e-14);
}

TEST(DifferenceVector, FlatPlateIsMinusGradientOfNormalDisplacement) {
  const ParamPoint pt{0.3, 0.7};
  const FlatPoint fp = flat_point(pt, 2);
  const JetVec u = combine({{phi_jet(pt, 2), fp.R.col(2)}, {phi_jet(pt, 2), fp.R.col(0)}}, 2);
  const Vec3 grad_un = kPi * std::cos(kPi * pt.u) * std::sin(kPi * pt.v) * fp.R.col(0) +
                       kPi * std::sin(kPi * pt.u) * std::cos(kPi * pt.v) * fp.R.col(1);
  EXPECT_LE((difference_vector(fp.s, u) + grad_un).norm(), 1e-13);
}

TEST(DifferenceVector, TangentialOnCylinder) {
  const PointJets pj = random_cylinder_point(2, 2);
  const Vec3 n = Vec3(pj.surface.n[0].value(), pj.surface.n[1].value(), pj.surface.n[2].value());
  const Vec3 w = difference_vector(pj.surface, pj.u);
  EXPECT_LE(std::abs(w.dot(n)), 1e-13 * (1.0 + w.norm()));
}

TEST(Strains, RigidTranslationIsStrainFree) {
  const PointJets pj = random_cylinder_point(3, 3);
  const Strains e = strains(pj.surface, constant_field(Vec3(0.3, 0.1, -2), 3));
  EXPECT_LE(e.membrane_cov.norm() + e.membrane_dir.norm() + e.bending_cov.norm() + e.bending_dir.norm(), 1e-13);
}

TEST(Strains, StretchOnFlatPatch) {
  const NurbsPatch sq = refine_patch(NurbsPatch::bezier(1, 1, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}, {1, 1, 1, 1}), 2, 1);
  const ParamPoint pt{0.4, 0.2};
  const SurfaceJets s = surface_jets(sq.eval_geometry(0, pt, 3));
  std::array<double, Jet::kCapacity> d{};
  d[0] = pt.u;
  d[static_cast<std::size_t>(Jet::index(1, 0))] = 1.0;
  const JetVec u{Jet::from_derivatives(d, 2), Jet::constant(0.0, 2), Jet::constant(0.0, 2)};
  const Strains e = strains(s, u);
  EXPECT_LE((e.membrane_cov - Vec3(1, 0, 0).asDiagonal().toDenseMatrix()).norm(), 1e-14);
  EXPECT_LE(e.bending_cov.norm(), 1e-14);
}

TEST(Strains, FlatBendingIsMinusHessianOfNormalDisplacement) {
  const ParamPoint pt{0.35, 0.8};
  const FlatPoint fp = flat_point(pt, 3);
  const JetVec u = combine({{phi_jet(pt, 2), fp.R.col(2)}}, 2);
  const double sr = std::sin(kPi * pt.u), cr = std::cos(kPi * pt.u), ss = std::sin(kPi * pt.v), cs = std::cos(kPi * pt.v);
  Mat2 K;
  K << -kPi * kPi * sr * ss, kPi * kPi * cr * cs, kPi * kPi * cr * cs, -kPi * kPi * sr * ss;
  const Mat32 E = fp.R.leftCols<2>();
  const Mat3 expected = -E * K * E.transpose();
  const Strains e = strains(fp.s, u);
  EXPECT_LE((e.bending_cov - expected).norm(), 1e-10);
  EXPECT_LE((e.bending_dir - expected).norm(), 1e-10);
}

TEST(Strains, DirectionalVariantsProjectToCovariant) {
  const PointJets pj = random_cylinder_point(4, 2);
  const Strains e = strains(pj.surface, pj.u);
  Mat3 P;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) P(i, j) = pj.surface.P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].value();
  const double s = 1.0 + e.membrane_cov.norm() + e.bending_cov.norm();
  EXPECT_LE((P * e.membrane_dir * P - e.membrane_cov).norm(), 1e-12 * s);
  EXPECT_LE((P * e.bending_dir * P - e.bending_cov).norm(), 1e-12 * s);
  EXPECT_LE((P * e.membrane_cov * P - e.membrane_cov).norm(), 1e-12 * s);
  EXPECT_LE((P * e.bending_cov * P - e.bending_cov).norm(), 1e-12 * s);
}

TEST(StressResultants, ZeroDisplacement) {
  const PointJets pj = random_cylinder_point(5, 3);
  const StressResultants r = stress_resultants(pj.surface, constant_field(Vec3::Zero(), 3), Material(1e5, 0.3, 0.1), true);
  EXPECT_EQ(r.m.norm() + r.n_eff.norm() + r.n_real.norm() + r.q.norm(), 0.0);
}

TEST(StressResultants, InPlaneEigenstructureAndRealNormalForce) {
  const PointJets pj = random_cylinder_point(6, 3);
  const Material mat(1e5, 0.3, 0.1);
  const StressResultants r = stress_resultants(pj.surface, pj.u, mat, true);
  const Vec3 n(pj.surface.n[0].value(), pj.surface.n[1].value(), pj.surface.n[2].value());
  Mat3 H, P;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      H(i, j) = pj.surface.H[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].value();
      P(i, j) = pj.surface.P[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)].value();
    }
  const double sm = r.m.norm(), sn = r.n_eff.norm();
  EXPECT_LE((r.m * n).norm(), 1e-12 * sm);
  EXPECT_LE((P * r.m * P - r.m).norm(), 1e-12 * sm);
  EXPECT_LE((P * r.n_eff * P - r.n_eff).norm(), 1e-12 * sn);
  EXPECT_LE((r.n_real - r.n_eff - H * r.m).norm(), 1e-14 * (sn + sm));
  EXPECT_LE(std::abs(r.q.dot(n)), 1e-12 * r.q.norm());
  EXPECT_NEAR(r.m1 + r.m2, r.m.trace(), 1e-12 * sm);
  EXPECT_THROW(stress_resultants(pj.surface, combine({}, 2), mat, true), DomainError);
}

TEST(StressResultants, PlateCenterMomentMatchesKirchhoff) {
  const Material mat(10000.0, 0.3, 0.01);
  const ParamPoint pt{0.5, 0.5};
  const FlatPoint fp = flat_point(pt, 3);
  Jet un = phi_jet(pt, 3);
  un *= -1.0 / (4.0 * std::pow(kPi, 4));
  const StressResultants r = stress_resultants(fp.s, combine({{un, fp.R.col(2)}}, 3), mat, true);
  // w_xx = w_yy = 1 / (4 pi^2) at the center; m = -D (w_xx + nu w_yy).
  const double expected = -mat.bending_rigidity() * (1.0 + mat.nu) / (4.0 * kPi * kPi);
  EXPECT_NEAR(fp.R.col(0).dot(r.m * fp.R.col(0)), expected, 1e-12 * std::abs(expected));
  EXPECT_NEAR(fp.R.col(1).dot(r.m * fp.R.col(1)), expected, 1e-12 * std::abs(expected));
  EXPECT_NEAR(r.m1, expected, 1e-12 * std::abs(expected));
  EXPECT_LE(r.q.norm(), 1e-14);
}

TEST(StrongForm, VanishesForZeroAndRigidFields) {
  const PointJets pj = random_cylinder_point(7, 4);
  const Material mat(1e5, 0.3, 0.1);
  EXPECT_EQ(strong_form_operator(pj.surface, constant_field(Vec3::Zero(), 4), mat).norm(), 0.0);
  EXPECT_LE(strong_form_operator(pj.surface, constant_field(Vec3(1, 2, 3), 4), mat).norm(), 1e-9);
  EXPECT_THROW(strong_form_operator(pj.surface, constant_field(Vec3::Zero(), 3), mat), DomainError);
}

TEST(StrongForm, ManufacturedFlatShellIsInEquilibrium) {
  const CaseSpec spec = default_spec("flat_shell");
  const BenchmarkCase c = make_case(spec, 4, 1);
  const Mat3 R = frame_for_normal(spec.normal);
  for (const ParamPoint pt : {ParamPoint{0.3, 0.6}, ParamPoint{0.5, 0.5}, ParamPoint{0.81, 0.12}}) {
    const SurfaceJets s = surface_jets(c.surface.eval_geometry(0, pt, 4));
    Jet un = phi_jet(pt, 4), ut = phi_jet(pt, 4);
    un *= -1.0 / (4.0 * std::pow(kPi, 4));
    ut *= 0.25;
    const JetVec u = combine({{un, R.col(2)}, {ut, R.col(0)}, {ut, R.col(1)}}, 4);
    const Vec3 f = c.load_field(Vec3::Zero(), pt);
    const Vec3 residual = strong_form_operator(s, u, c.material) + f;
    EXPECT_LE(residual.norm(), 1e-8 * f.norm());
  }
}

TEST(BoundaryForces, ZeroDisplacement) {
  const PointJets pj = random_cylinder_point(8, 3);
  const BoundaryForces b = boundary_forces(pj.surface, constant_field(Vec3::Zero(), 3), Material(1e5, 0.3, 0.1), Edge::South);
  EXPECT_EQ(std::abs(b.pt_eff) + std::abs(b.pconormal_eff) + std::abs(b.pn_eff) + std::abs(b.m_t) + std::abs(b.omega_t) +
                std::abs(b.omega_conormal),
            0.0);
}

TEST(BoundaryForces, DecompositionRecomposesTheTraction) {
  const PointJets pj = random_cylinder_point(9, 3);
  const BoundaryForces b = boundary_forces(pj.surface, pj.u, Material(1e5, 0.3, 0.1), Edge::East);
  const Vec3 n(pj.surface.n[0].value(), pj.surface.n[1].value(), pj.surface.n[2].value());
  const Vec3 re = b.pt_eff * b.t + b.pconormal_eff * b.conormal + b.pn_eff * n;
  EXPECT_LE((re - b.traction).norm(), 1e-10 * b.traction.norm());
  EXPECT_NEAR(b.t.dot(b.conormal), 0.0, 1e-14);
  EXPECT_LE((n.cross(b.t) - b.conormal).norm(), 1e-14);
}

TEST(BoundaryForces, FlatEdgeGivesKirchhoffEffectiveShear) {
  const Material mat(10000.0, 0.3, 0.01);
  for (double r : {0.2, 0.5, 0.7}) {
    const ParamPoint pt{r, 0.0};
    const FlatPoint fp = flat_point(pt, 4);
    const BoundaryForces b = boundary_forces(fp.s, combine({{phi_jet(pt, 3), fp.R.col(2)}}, 3), mat, Edge::South);
    // V = -D (d_n w_nn + (2 - nu) d_n w_tt) with outward n = -s on the edge s = 0.
    const double expected = -mat.bending_rigidity() * std::pow(kPi, 3) * (3.0 - mat.nu) * std::sin(kPi * r);
    EXPECT_NEAR(b.pn_eff, expected, 1e-10 * std::abs(expected));
    EXPECT_LE((b.conormal + fp.R.col(1)).norm(), 1e-14);
    // Rotation about the edge: w = -grad w, omega_t = w . n_d = d_s w.
    EXPECT_NEAR(b.omega_t, kPi * std::sin(kPi * r), 1e-12);
  }
}
