#pragma once

// Operator property checks and the TDC-vs-curvilinear stiffness comparison,
// shared by the `verify` command and the acceptance binary.

#include "tdcshell/assembly.hpp"
#include "tdcshell/bench_suite.hpp"
#include "tdcshell/nurbs.hpp"
#include "tdcshell/tdc_ops.hpp"
#include "tdcshell/testing/classical_oracle.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace tdcshell::testing {

struct CheckResult {
  std::string name;
  double value = 0.0;      ///< worst observed metric
  double tolerance = 0.0;  ///< pass when value <= tolerance
  bool passed = false;
  std::string detail;      ///< location of the worst case
};

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  int fuzz_trials = 100;
  bool flip_weingarten = false;  ///< test hook: negate H after build_frame
};

/// Random smooth patch: perturbed Bezier net of degree q elevated to p and split into n spans.
inline NurbsPatch random_patch(std::mt19937_64& rng, int q, int p, int n, double bump = 0.3) {
  std::uniform_real_distribution<double> jitter(-0.05, 0.05), height(-bump, bump), weight(0.75, 1.25);
  std::vector<Vec3> pts;
  std::vector<double> wts;
  for (int j = 0; j <= q; ++j)
    for (int i = 0; i <= q; ++i) {
      pts.emplace_back(static_cast<double>(i) / q + jitter(rng), static_cast<double>(j) / q + jitter(rng), height(rng));
      wts.push_back(weight(rng));
    }
  // Random rigid orientation so no axis is special.
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::Quaterniond rot = Eigen::Quaterniond(g(rng), g(rng), g(rng), g(rng)).normalized();
  for (Vec3& x : pts) x = rot * x;
  return refine_patch(NurbsPatch::bezier(q, q, pts, wts), p, n);
}

inline SurfaceFrame checked_frame(const GeometryEval& g, const VerifyOptions& opt) {
  SurfaceFrame f = build_frame(g);
  if (opt.flip_weingarten && f.has_curvature) {
    f.H = -f.H;
    std::tie(f.kappa1, f.kappa2) = principal_curvatures(f.H, f.normal);
    f.mean_curvature = f.H.trace();
    f.gauss_curvature = f.kappa1 * f.kappa2;
  }
  return f;
}

namespace detail {

struct Worst {
  double value = 0.0;
  std::string where;
  void update(double v, const std::string& w) {
    if (!(v <= value)) {  // NaN counts as worst
      value = v;
      where = w;
    }
  }
};

inline CheckResult finish(const std::string& name, const Worst& w, double tol) {
  return {name, w.value, tol, w.value <= tol, w.where};
}

inline std::string at(int trial, ParamPoint pt) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "trial %d at (%.6f, %.6f)", trial, pt.u, pt.v);
  return buf;
}

/// Random interior point of a random element.
inline std::pair<int, ParamPoint> random_point(std::mt19937_64& rng, const NurbsPatch& patch) {
  std::uniform_int_distribution<int> pick(0, patch.num_elements() - 1);
  std::uniform_real_distribution<double> t(0.1, 0.9);
  const int e = pick(rng);
  const ElementBounds b = patch.element_bounds(e);
  return {e, {b.u0 + t(rng) * (b.u1 - b.u0), b.v0 + t(rng) * (b.v1 - b.v0)}};
}

}  // namespace detail

inline CheckResult check_projector(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  detail::Worst w;
  std::vector<Vec3> normals{Vec3(0, 0, 1), Vec3(-0.25, -std::sqrt(3.0) / 2.0, std::sqrt(3.0) / 4.0)};
  for (int k = 0; k < 50; ++k) normals.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
  for (std::size_t k = 0; k < normals.size(); ++k) {
    const Mat3 P = projector(normals[k]);
    const double v = std::max({(P * P - P).norm(), (P - P.transpose()).norm(), (P * normals[k]).norm(),
                               std::abs(P.trace() - 2.0)});
    w.update(v, "normal " + std::to_string(k));
  }
  return detail::finish("projector symmetric, idempotent, P n = 0", w, 1e-12);
}

/// Partition of unity and zero-sum parametric derivatives through order 4.
inline CheckResult check_partition_of_unity(std::mt19937_64& rng) {
  detail::Worst w;
  for (int trial = 0; trial < 20; ++trial) {
    const NurbsPatch patch = random_patch(rng, 2, 2 + trial % 4, 1 + trial % 3);
    for (int k = 0; k < 10; ++k) {
      const auto [e, pt] = detail::random_point(rng, patch);
      const BasisEval be = patch.eval_basis(e, pt, 4);
      double v = std::abs(be.derivs.col(0).sum() - 1.0);
      for (int s = 1; s < be.derivs.cols(); ++s) v = std::max(v, std::abs(be.derivs.col(s).sum()) / std::max(1.0, be.derivs.col(s).cwiseAbs().maxCoeff()));
      w.update(v, detail::at(trial, pt));
    }
  }
  return detail::finish("partition of unity, zero-sum derivatives", w, 1e-12);
}

/// Order-k parametric basis derivatives vs central differences of order k-1, k = 1..4.
inline CheckResult check_basis_fd(std::mt19937_64& rng) {
  detail::Worst w;
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const NurbsPatch patch = random_patch(rng, 3, 4 + trial % 3, 1 + trial % 2);
    for (int k = 0; k < 5; ++k) {
      const auto [e, pt] = detail::random_point(rng, patch);
      const ElementBounds b = patch.element_bounds(e);
      const double hu = h * (b.u1 - b.u0), hv = h * (b.v1 - b.v0);
      const BasisEval c = patch.eval_basis(e, pt, 4);
      const BasisEval up = patch.eval_basis(e, {pt.u + hu, pt.v}, 4), um = patch.eval_basis(e, {pt.u - hu, pt.v}, 4);
      const BasisEval vp = patch.eval_basis(e, {pt.u, pt.v + hv}, 4), vm = patch.eval_basis(e, {pt.u, pt.v - hv}, 4);
      for (int order = 1; order <= 4; ++order) {
        double scale = 0.0, err = 0.0;
        for (int a = 0; a <= order; ++a) {
          const int bb = order - a;
          for (int i = 0; i < c.size(); ++i) {
            scale = std::max(scale, std::abs(c.d(i, a, bb)));
            if (a > 0) err = std::max(err, std::abs((up.d(i, a - 1, bb) - um.d(i, a - 1, bb)) / (2 * hu) - c.d(i, a, bb)));
            if (bb > 0) err = std::max(err, std::abs((vp.d(i, a, bb - 1) - vm.d(i, a, bb - 1)) / (2 * hv) - c.d(i, a, bb)));
          }
        }
        w.update(err / scale, detail::at(trial, pt) + ", order " + std::to_string(order));
      }
    }
  }
  return detail::finish("basis derivatives vs finite differences (orders 1-4)", w, 1e-6);
}

/// Second and third mapping derivatives vs central differences of the next lower order.
inline CheckResult check_geometry_fd(std::mt19937_64& rng) {
  detail::Worst w;
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const NurbsPatch patch = random_patch(rng, 3, 3 + trial % 3, 2);
    const auto [e, pt] = detail::random_point(rng, patch);
    const ElementBounds b = patch.element_bounds(e);
    const double hu = h * (b.u1 - b.u0);
    const GeometryEval c = patch.eval_geometry(e, pt, 4);
    const GeometryEval p = patch.eval_geometry(e, {pt.u + hu, pt.v}, 4), m = patch.eval_geometry(e, {pt.u - hu, pt.v}, 4);
    for (int order = 2; order <= 4; ++order) {
      double scale = 0.0, err = 0.0;
      for (int a = 1; a <= order; ++a) {
        const int bb = order - a;
        scale = std::max(scale, c.d(a, bb).norm());
        err = std::max(err, ((p.d(a - 1, bb) - m.d(a - 1, bb)) / (2 * hu) - c.d(a, bb)).norm());
      }
      w.update(err / scale, detail::at(trial, pt) + ", order " + std::to_string(order));
    }
  }
  return detail::finish("mapping derivatives vs finite differences", w, 1e-6);
}

/// P, H and curvature relations at random points of random curved patches.
inline CheckResult check_frame_invariants(std::mt19937_64& rng, const VerifyOptions& opt) {
  detail::Worst w;
  for (int trial = 0; trial < 20; ++trial) {
    const NurbsPatch patch = random_patch(rng, 3, 3, 2);
    for (int k = 0; k < 5; ++k) {
      const auto [e, pt] = detail::random_point(rng, patch);
      const SurfaceFrame f = checked_frame(patch.eval_geometry(e, pt, 2), opt);
      const double hs = 1.0 + f.H.norm();
      const double v = std::max({(f.P * f.P - f.P).norm(), (f.P * f.normal).norm(), (f.H - f.H.transpose()).norm() / hs,
                                 (f.H * f.normal).norm() / hs, (f.P * f.H * f.P - f.H).norm() / hs,
                                 std::abs(f.mean_curvature - f.H.trace()) / hs,
                                 std::abs(std::abs(f.kappa1 + f.kappa2) - std::abs(f.H.trace())) / hs,
                                 std::abs(f.gauss_curvature - f.kappa1 * f.kappa2) / (hs * hs)});
      w.update(v, detail::at(trial, pt));
    }
  }
  return detail::finish("frame invariants (P, H symmetric in-plane, curvature relations)", w, 1e-10);
}

/// H x_u and H x_v against central differences of the unit normal.
inline CheckResult check_weingarten_fd(std::mt19937_64& rng, const VerifyOptions& opt) {
  detail::Worst w;
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const NurbsPatch patch = random_patch(rng, 3, 3, 2);
    const auto [e, pt] = detail::random_point(rng, patch);
    const SurfaceFrame f = checked_frame(patch.eval_geometry(e, pt, 2), opt);
    const Vec3 nup = build_frame(patch.eval_geometry(e, {pt.u + h, pt.v}, 1)).normal;
    const Vec3 num = build_frame(patch.eval_geometry(e, {pt.u - h, pt.v}, 1)).normal;
    const Vec3 nvp = build_frame(patch.eval_geometry(e, {pt.u, pt.v + h}, 1)).normal;
    const Vec3 nvm = build_frame(patch.eval_geometry(e, {pt.u, pt.v - h}, 1)).normal;
    const Vec3 du = (nup - num) / (2 * h), dv = (nvp - nvm) / (2 * h);
    const double scale = std::max({1.0, du.norm(), dv.norm()});
    w.update(std::max((f.H * f.J.col(0) - du).norm(), (f.H * f.J.col(1) - dv).norm()) / scale, detail::at(trial, pt));
  }
  return detail::finish("Weingarten map vs finite differences of the normal", w, 1e-6);
}

/// Cylinder of radius 2 and a sphere cap of radius 3, both with outward normals.
inline CheckResult check_curvatures(const VerifyOptions& opt) {
  detail::Worst w;
  const double R = 2.0;
  const NurbsPatch cyl = cylinder_patch(R, -0.6, 0.7, 3.0, 3, 2);
  for (double u : {0.1, 0.45, 0.8})
    for (double v : {0.2, 0.7}) {
      const ParamPoint pt{u, v};
      const SurfaceFrame f = checked_frame(cyl.eval_geometry(cyl.locate(pt), pt, 2), opt);
      // Outward normal: H has eigenvalue +1/R, so kappa = (0, -1/R) and tr H = 1/R.
      const double v1 = std::max({std::abs(f.kappa1), std::abs(f.kappa2 + 1.0 / R), std::abs(f.mean_curvature - 1.0 / R),
                                  std::abs(f.gauss_curvature)});
      w.update(v1, "cylinder " + detail::at(0, pt));
    }
  // Sphere octant from the exact map with outward normal.
  const double Rs = 3.0;
  auto sphere = [Rs](ParamPoint pt, int order) {
    const double th = pt.u, ph = pt.v;
    GeometryEval g;
    g.order = order;
    g.derivs.assign(static_cast<std::size_t>(deriv_slot_count(order)), Vec3::Zero());
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b) {
        const double q = std::numbers::pi / 2.0;
        const double st = std::sin(th + a * q), sp = std::sin(ph + b * q), cp = std::cos(ph + b * q);
        g.derivs[static_cast<std::size_t>(deriv_slot(a, b))] = Rs * Vec3(st * cp, st * sp, b == 0 ? std::cos(th + a * q) : 0.0);
      }
    return g;
  };
  for (double th : {0.4, 0.9, 1.3})
    for (double ph : {0.2, 1.1}) {
      const SurfaceFrame f = checked_frame(sphere({th, ph}, 2), opt);
      const double v1 = std::max({std::abs(f.kappa1 + 1.0 / Rs), std::abs(f.kappa2 + 1.0 / Rs), std::abs(f.mean_curvature - 2.0 / Rs),
                                  std::abs(f.gauss_curvature - 1.0 / (Rs * Rs))});
      w.update(v1, "sphere " + detail::at(0, {th, ph}));
    }
  return detail::finish("principal and mean curvature on cylinder and sphere", w, 1e-10);
}

/// Tangential gradients and Hessians: in-plane, trace invariance, explicit vs jet route.
inline CheckResult check_shape_derivatives(std::mt19937_64& rng) {
  detail::Worst w;
  for (int trial = 0; trial < 20; ++trial) {
    const NurbsPatch patch = random_patch(rng, 3, 4, 2);
    const auto [e, pt] = detail::random_point(rng, patch);
    const BasisEval be = patch.eval_basis(e, pt, 4);
    const GeometryEval g = patch.geometry_from_basis(be);
    const SurfaceFrame f = build_frame(g);
    const ShapeSurfaceDerivatives sd = shape_surface_derivatives(be, f);
    const HighOrderShapeDerivatives ho = high_order_derivatives(be, g, 2);
    double v = 0.0;
    for (int a = 0; a < be.size(); ++a) {
      const Mat3& hd = sd.hess_dir[static_cast<std::size_t>(a)];
      const Mat3& hc = sd.hess_cov[static_cast<std::size_t>(a)];
      const double s = 1.0 + hd.norm() + sd.grad.row(a).norm();
      Mat3 hj;
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) hj(i, j) = ho.d2[static_cast<std::size_t>(a)][static_cast<std::size_t>(i * 3 + j)];
      v = std::max({v, std::abs(sd.grad.row(a).dot(f.normal)) / s, (hc - hc.transpose()).norm() / s, (hc * f.normal).norm() / s,
                    (f.normal.transpose() * hc).norm() / s, std::abs(hd.trace() - hc.trace()) / s, (hd - hj).norm() / s});
    }
    w.update(v, detail::at(trial, pt));
  }
  return detail::finish("shape gradients/Hessians in-plane, trace invariance, jet cross-check", w, 1e-10);
}

/// Third and fourth tangential derivatives vs central differences of the order below.
inline CheckResult check_high_order_fd(std::mt19937_64& rng) {
  detail::Worst w;
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    const NurbsPatch patch = random_patch(rng, 3, 5, 1, 0.2);
    const auto [e, pt] = detail::random_point(rng, patch);
    const BasisEval be = patch.eval_basis(e, pt, 4);
    const GeometryEval g = patch.geometry_from_basis(be);
    const SurfaceFrame f = build_frame(g);
    const HighOrderShapeDerivatives c = high_order_derivatives(be, g, 4);
    std::array<HighOrderShapeDerivatives, 4> nb;  // u+, u-, v+, v-
    const ParamPoint off[4] = {{pt.u + h, pt.v}, {pt.u - h, pt.v}, {pt.u, pt.v + h}, {pt.u, pt.v - h}};
    for (int k = 0; k < 4; ++k) {
      const BasisEval bk = patch.eval_basis(e, off[k], 4);
      nb[static_cast<std::size_t>(k)] = high_order_derivatives(bk, patch.geometry_from_basis(bk), 4);
    }
    double err = 0.0, scale = 0.0;
    for (int a = 0; a < be.size(); ++a) {
      const auto A = static_cast<std::size_t>(a);
      for (int dir = 0; dir < 2; ++dir) {
        const Vec3 xd = f.J.col(dir);
        const auto& P = nb[static_cast<std::size_t>(2 * dir)];
        const auto& M = nb[static_cast<std::size_t>(2 * dir + 1)];
        // d/du of the order-2 field equals sum_k d3[..k] x_u,k (chain rule along the surface).
        for (int ij = 0; ij < 9; ++ij) {
          const double fd = (P.d2[A][static_cast<std::size_t>(ij)] - M.d2[A][static_cast<std::size_t>(ij)]) / (2 * h);
          double ex = 0.0;
          for (int k = 0; k < 3; ++k) ex += c.d3[A][static_cast<std::size_t>(ij * 3 + k)] * xd(k);
          err = std::max(err, std::abs(fd - ex));
          scale = std::max(scale, std::abs(ex));
        }
        for (int ijk = 0; ijk < 27; ++ijk) {
          const double fd = (P.d3[A][static_cast<std::size_t>(ijk)] - M.d3[A][static_cast<std::size_t>(ijk)]) / (2 * h);
          double ex = 0.0;
          for (int l = 0; l < 3; ++l) ex += c.d4[A][static_cast<std::size_t>(ijk * 3 + l)] * xd(l);
          err = std::max(err, std::abs(fd - ex));
          scale = std::max(scale, std::abs(ex));
        }
      }
    }
    w.update(err / scale, detail::at(trial, pt));
  }
  return detail::finish("third/fourth tangential derivatives vs finite differences", w, 1e-6);
}

/// Largest per-element ||K_TDC - K_classical|| / ||K_TDC|| over a surface.
inline double max_oracle_mismatch(const ShellSurface& surf, const Material& mat, int points = 0) {
  const QuadratureRule rule = gauss_rule(points > 0 ? points : default_quadrature_points(surf.patch()));
  double worst = 0.0;
  for (int e = 0; e < surf.num_elements(); ++e) worst = std::max(worst, oracle_mismatch(surf, e, mat, rule));
  return worst;
}

inline CheckResult check_oracle_benchmarks() {
  detail::Worst w;
  for (const std::string& name : case_names()) {
    const BenchmarkCase c = make_case(default_spec(name), 4, 4);
    w.update(max_oracle_mismatch(c.surface, c.material), name);
  }
  return detail::finish("TDC vs curvilinear stiffness on benchmark patches", w, 1e-9);
}

inline CheckResult check_oracle_fuzz(std::mt19937_64& rng, int trials) {
  detail::Worst w;
  std::uniform_real_distribution<double> E(1.0, 1e6), nu(0.0, 0.45), t(0.01, 0.5);
  for (int trial = 0; trial < trials; ++trial) {
    const int p = 2 + trial % 4;
    const ShellSurface surf(random_patch(rng, 2 + trial % 2, p, 1 + trial % 3, 0.4));
    const Material mat(E(rng), nu(rng), t(rng));
    w.update(max_oracle_mismatch(surf, mat), "trial " + std::to_string(trial) + ", p = " + std::to_string(p));
  }
  return detail::finish("TDC vs curvilinear stiffness on " + std::to_string(trials) + " random patches", w, 1e-9);
}

/// Eigenvalues of the free stiffness with |lambda| <= tol * max |lambda|.
inline int count_zero_eigenvalues(const Eigen::SparseMatrix<double>& K, double tol = 1e-10) {
  const Eigen::MatrixXd D(K);
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (D + D.transpose()), Eigen::EigenvaluesOnly).eigenvalues();
  const double mx = ev.cwiseAbs().maxCoeff();
  int count = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i)) <= tol * mx) ++count;
  return count;
}

inline CheckResult check_free_flat_patch() {
  const ShellSurface surf(flat_patch(Vec3(-0.25, -std::sqrt(3.0) / 2.0, std::sqrt(3.0) / 4.0), 3, 3));
  const SaddleSystem sys = assemble(surf, Material(10000.0, 0.3, 0.01), {}, {});
  const int zeros = count_zero_eigenvalues(sys.K);
  CheckResult r{"free flat patch has 6 zero stiffness eigenvalues", static_cast<double>(std::abs(zeros - 6)), 0.0,
                zeros == 6, std::to_string(zeros) + " zero eigenvalues"};
  return r;
}

inline std::vector<CheckResult> run_verify_suite(const VerifyOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::vector<CheckResult> out;
  out.push_back(check_projector(rng));
  out.push_back(check_partition_of_unity(rng));
  out.push_back(check_basis_fd(rng));
  out.push_back(check_geometry_fd(rng));
  out.push_back(check_frame_invariants(rng, opt));
  out.push_back(check_weingarten_fd(rng, opt));
  out.push_back(check_curvatures(opt));
  out.push_back(check_shape_derivatives(rng));
  out.push_back(check_high_order_fd(rng));
  out.push_back(check_oracle_benchmarks());
  out.push_back(check_oracle_fuzz(rng, opt.fuzz_trials));
  out.push_back(check_free_flat_patch());
  return out;
}

inline std::string format_results(const std::vector<CheckResult>& rs) {
  std::string s;
  char buf[256];
  for (const CheckResult& r : rs) {
    std::snprintf(buf, sizeof buf, "%-4s %-70s %10.3e <= %8.1e", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.value, r.tolerance);
    s += buf;
    if (!r.passed && !r.detail.empty()) s += "  [" + r.detail + "]";
    s += "\n";
  }
  return s;
}

}  // namespace tdcshell::testing
