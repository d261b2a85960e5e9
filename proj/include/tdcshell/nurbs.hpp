#pragma once

#include "tdcshell/common.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace tdcshell {

/// Highest parametric derivative order the basis evaluators support.
inline constexpr int kMaxBasisOrder = 4;

/// Slot of the mixed derivative d^{a+b}/du^a dv^b in derivative arrays (total-degree order).
constexpr int deriv_slot(int a, int b) { return (a + b) * (a + b + 1) / 2 + b; }
constexpr int deriv_slot_count(int order) { return (order + 1) * (order + 2) / 2; }

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Knot vector of a B-spline direction.
///
/// Open (clamped) vectors repeat the end knots p+1 times. Periodic vectors are
/// uniform and extended by p knots past each end; their n+p raw basis
/// functions are identified modulo n, which yields a closed, C^{p-1} direction.
class KnotVector {
 public:
  KnotVector() = default;

  /// Open knot vector from explicit knots; validates clamping and multiplicities.
  KnotVector(int degree, std::vector<double> knots) : degree_(degree), knots_(std::move(knots)) {
    validate_open();
  }

  static KnotVector open_uniform(int degree, int spans, double a = 0.0, double b = 1.0) {
    if (spans < 1) throw DomainError("knot vector needs at least one span");
    std::vector<double> k;
    for (int i = 0; i <= degree; ++i) k.push_back(a);
    for (int i = 1; i < spans; ++i) k.push_back(a + (b - a) * i / spans);
    for (int i = 0; i <= degree; ++i) k.push_back(b);
    return KnotVector(degree, std::move(k));
  }

  static KnotVector periodic_uniform(int degree, int spans, double a, double b) {
    if (degree < 1) throw DomainError("degree must be >= 1");
    if (spans < 1) throw DomainError("knot vector needs at least one span");
    KnotVector kv;
    kv.degree_ = degree;
    kv.periodic_ = true;
    const double h = (b - a) / spans;
    for (int i = -degree; i <= spans + degree; ++i) kv.knots_.push_back(a + h * i);
    // Pin the interior ends exactly so span lookup at the domain bounds is exact.
    kv.knots_[static_cast<std::size_t>(degree)] = a;
    kv.knots_[static_cast<std::size_t>(degree + spans)] = b;
    return kv;
  }

  int degree() const { return degree_; }
  bool periodic() const { return periodic_; }
  const std::vector<double>& knots() const { return knots_; }
  double front() const { return knots_[static_cast<std::size_t>(degree_)]; }
  double back() const { return knots_[knots_.size() - 1 - static_cast<std::size_t>(degree_)]; }

  /// Number of raw (unidentified) basis functions.
  int raw_count() const { return static_cast<int>(knots_.size()) - degree_ - 1; }
  /// Number of independent basis functions (degrees of freedom) in this direction.
  int count() const { return periodic_ ? raw_count() - degree_ : raw_count(); }
  int unique_index(int raw) const { return periodic_ ? raw % count() : raw; }

  /// Knot-span indices of all nonzero-length spans, i.e. the elements.
  std::vector<int> element_spans() const {
    std::vector<int> spans;
    for (int i = degree_; i < raw_count(); ++i)
      if (knots_[static_cast<std::size_t>(i + 1)] > knots_[static_cast<std::size_t>(i)]) spans.push_back(i);
    return spans;
  }

  double knot(int i) const { return knots_[static_cast<std::size_t>(i)]; }

  /// Span index containing u (last nonzero span for u at the right end).
  int find_span(double u) const {
    const int n = raw_count() - 1;
    if (u >= knot(n + 1)) {
      int s = n;
      while (knot(s) >= knot(s + 1)) --s;
      return s;
    }
    if (u <= knot(degree_)) {
      int s = degree_;
      while (knot(s + 1) <= knot(s)) ++s;
      return s;
    }
    auto it = std::upper_bound(knots_.begin() + degree_, knots_.begin() + n + 1, u);
    return static_cast<int>(it - knots_.begin()) - 1;
  }

  /// Derivatives 0..d of the p+1 nonzero B-splines on `span` at u.
  /// Returns ders[k][j] = d^k N_{span-p+j} / du^k (row-major, (d+1) x (p+1)).
  std::vector<double> basis_derivatives(int span, double u, int d) const {
    const int p = degree_;
    std::vector<double> ndu(static_cast<std::size_t>((p + 1) * (p + 1)));
    auto NDU = [&](int i, int j) -> double& { return ndu[static_cast<std::size_t>(i * (p + 1) + j)]; };
    std::vector<double> left(static_cast<std::size_t>(p + 1)), right(static_cast<std::size_t>(p + 1));
    NDU(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[static_cast<std::size_t>(j)] = u - knot(span + 1 - j);
      right[static_cast<std::size_t>(j)] = knot(span + j) - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        NDU(j, r) = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
        const double temp = NDU(r, j - 1) / NDU(j, r);
        NDU(r, j) = saved + right[static_cast<std::size_t>(r + 1)] * temp;
        saved = left[static_cast<std::size_t>(j - r)] * temp;
      }
      NDU(j, j) = saved;
    }
    std::vector<double> ders(static_cast<std::size_t>((d + 1) * (p + 1)), 0.0);
    auto D = [&](int k, int j) -> double& { return ders[static_cast<std::size_t>(k * (p + 1) + j)]; };
    for (int j = 0; j <= p; ++j) D(0, j) = NDU(j, p);
    std::vector<double> a(static_cast<std::size_t>(2 * (p + 1)));
    auto A = [&](int s, int j) -> double& { return a[static_cast<std::size_t>(s * (p + 1) + j)]; };
    for (int r = 0; r <= p; ++r) {
      int s1 = 0, s2 = 1;
      A(0, 0) = 1.0;
      for (int k = 1; k <= std::min(d, p); ++k) {
        double dd = 0.0;
        const int rk = r - k, pk = p - k;
        if (r >= k) {
          A(s2, 0) = A(s1, 0) / NDU(pk + 1, rk);
          dd = A(s2, 0) * NDU(rk, pk);
        }
        const int j1 = rk >= -1 ? 1 : -rk;
        const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
        for (int j = j1; j <= j2; ++j) {
          A(s2, j) = (A(s1, j) - A(s1, j - 1)) / NDU(pk + 1, rk + j);
          dd += A(s2, j) * NDU(rk + j, pk);
        }
        if (r <= pk) {
          A(s2, k) = -A(s1, k - 1) / NDU(pk + 1, r);
          dd += A(s2, k) * NDU(r, pk);
        }
        D(k, r) = dd;
        std::swap(s1, s2);
      }
    }
    double f = p;
    for (int k = 1; k <= std::min(d, p); ++k) {
      for (int j = 0; j <= p; ++j) D(k, j) *= f;
      f *= (p - k);
    }
    return ders;
  }

 private:
  void validate_open() {
    const int p = degree_;
    if (p < 1) throw DomainError("degree must be >= 1");
    const auto m = static_cast<int>(knots_.size());
    if (m < 2 * (p + 1)) throw DomainError("too few knots for degree " + std::to_string(p));
    for (int i = 1; i < m; ++i)
      if (knots_[static_cast<std::size_t>(i)] < knots_[static_cast<std::size_t>(i - 1)])
        throw DomainError("knot vector must be nondecreasing");
    for (int i = 1; i <= p; ++i)
      if (knots_[static_cast<std::size_t>(i)] != knots_[0] ||
          knots_[static_cast<std::size_t>(m - 1 - i)] != knots_[static_cast<std::size_t>(m - 1)])
        throw DomainError("knot vector must be open (end knots repeated p+1 times)");
    if (knots_.front() == knots_.back()) throw DomainError("knot vector has zero length");
    const double lo = knots_.front(), hi = knots_.back();
    int run = 0;
    for (int i = p + 1; i < m - p - 1; ++i) {
      const double k = knots_[static_cast<std::size_t>(i)];
      if (k == lo || k == hi) throw DomainError("end knot multiplicity exceeds p+1");
      run = (i > p + 1 && k == knots_[static_cast<std::size_t>(i - 1)]) ? run + 1 : 1;
      if (run > p) throw DomainError("interior knot multiplicity exceeds degree");
    }
  }

  int degree_ = 1;
  bool periodic_ = false;
  std::vector<double> knots_;
};

/// Values and mixed parametric derivatives of all shape functions supported on an element.
struct BasisEval {
  int element = -1;
  ParamPoint point;
  int order = 0;
  /// Global basis-function index of each local shape function (may repeat on tiny periodic meshes).
  std::vector<int> indices;
  /// derivs(i, deriv_slot(a,b)) = d^{a+b} R_i / du^a dv^b.
  Eigen::MatrixXd derivs;

  int size() const { return static_cast<int>(indices.size()); }
  double value(int i) const { return derivs(i, 0); }
  double d(int i, int a, int b) const { return derivs(i, deriv_slot(a, b)); }
};

/// Mapping x(u,v) and its mixed parametric derivatives through `order`.
struct GeometryEval {
  int order = 0;
  std::vector<Vec3> derivs;  ///< derivs[deriv_slot(a,b)]
  const Vec3& x() const { return derivs[0]; }
  const Vec3& d(int a, int b) const { return derivs[static_cast<std::size_t>(deriv_slot(a, b))]; }
};

/// Parametric bounds of one element (knot span pair).
struct ElementBounds {
  double u0, u1, v0, v1;
  double area() const { return (u1 - u0) * (v1 - v0); }
};

/// Tensor-product NURBS patch: the shell middle surface and the trial/test space.
///
/// Control points and weights are stored u-fastest: index i + count_u * j.
class NurbsPatch {
 public:
  NurbsPatch() = default;

  NurbsPatch(KnotVector ku, KnotVector kv, std::vector<Vec3> points, std::vector<double> weights)
      : ku_(std::move(ku)), kv_(std::move(kv)), points_(std::move(points)), weights_(std::move(weights)) {
    validate();
    build_elements();
  }

  /// Bezier patch (no interior knots) from a (p+1) x (q+1) control grid.
  static NurbsPatch bezier(int pu, int pv, std::vector<Vec3> points, std::vector<double> weights,
                           double u0 = 0.0, double u1 = 1.0, double v0 = 0.0, double v1 = 1.0) {
    return NurbsPatch(KnotVector::open_uniform(pu, 1, u0, u1), KnotVector::open_uniform(pv, 1, v0, v1),
                      std::move(points), std::move(weights));
  }

  const KnotVector& knots_u() const { return ku_; }
  const KnotVector& knots_v() const { return kv_; }
  int degree_u() const { return ku_.degree(); }
  int degree_v() const { return kv_.degree(); }
  int count_u() const { return ku_.count(); }
  int count_v() const { return kv_.count(); }
  int num_basis() const { return count_u() * count_v(); }
  const std::vector<Vec3>& control_points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  int basis_index(int i, int j) const { return i + count_u() * j; }

  int num_elements() const { return static_cast<int>(elem_u_.size() * elem_v_.size()); }
  int num_elements_u() const { return static_cast<int>(elem_u_.size()); }
  int num_elements_v() const { return static_cast<int>(elem_v_.size()); }
  int element_id(int eu, int ev) const { return eu + num_elements_u() * ev; }

  ElementBounds element_bounds(int elem) const {
    check_element(elem);
    const int su = elem_u_[static_cast<std::size_t>(elem % num_elements_u())];
    const int sv = elem_v_[static_cast<std::size_t>(elem / num_elements_u())];
    return {ku_.knot(su), ku_.knot(su + 1), kv_.knot(sv), kv_.knot(sv + 1)};
  }

  /// Element containing a parametric point (right/top element on shared knot lines).
  int locate(ParamPoint pt) const {
    const int su = ku_.find_span(pt.u), sv = kv_.find_span(pt.v);
    const auto iu = std::find(elem_u_.begin(), elem_u_.end(), su) - elem_u_.begin();
    const auto iv = std::find(elem_v_.begin(), elem_v_.end(), sv) - elem_v_.begin();
    return element_id(static_cast<int>(iu), static_cast<int>(iv));
  }

  /// Rational basis functions and parametric derivatives through d_max at a point of `elem`.
  BasisEval eval_basis(int elem, ParamPoint pt, int d_max) const {
    if (d_max < 0 || d_max > kMaxBasisOrder)
      throw DomainError("basis derivative order " + std::to_string(d_max) + " unsupported (max 4)");
    const ElementBounds b = element_bounds(elem);
    const double tol = 1e-12 * std::max({1.0, std::abs(b.u1 - b.u0), std::abs(b.v1 - b.v0)});
    if (pt.u < b.u0 - tol || pt.u > b.u1 + tol || pt.v < b.v0 - tol || pt.v > b.v1 + tol)
      throw DomainError("point outside element " + std::to_string(elem));
    const int su = elem_u_[static_cast<std::size_t>(elem % num_elements_u())];
    const int sv = elem_v_[static_cast<std::size_t>(elem / num_elements_u())];
    const int pu = degree_u(), pv = degree_v();
    const auto du = ku_.basis_derivatives(su, std::clamp(pt.u, b.u0, b.u1), d_max);
    const auto dv = kv_.basis_derivatives(sv, std::clamp(pt.v, b.v0, b.v1), d_max);
    const int nloc = (pu + 1) * (pv + 1);
    const int nslots = deriv_slot_count(d_max);

    BasisEval out;
    out.element = elem;
    out.point = pt;
    out.order = d_max;
    out.indices.resize(static_cast<std::size_t>(nloc));
    Eigen::MatrixXd wn(nloc, nslots);  // weighted B-spline products w_i N_i^{(a,b)}
    Eigen::VectorXd W = Eigen::VectorXd::Zero(nslots);
    for (int j = 0; j <= pv; ++j)
      for (int i = 0; i <= pu; ++i) {
        const int loc = i + (pu + 1) * j;
        const int g = basis_index(ku_.unique_index(su - pu + i), kv_.unique_index(sv - pv + j));
        out.indices[static_cast<std::size_t>(loc)] = g;
        const double w = weights_[static_cast<std::size_t>(g)];
        for (int a = 0; a <= d_max; ++a)
          for (int c = 0; a + c <= d_max; ++c) {
            const double val = du[static_cast<std::size_t>(a * (pu + 1) + i)] *
                               dv[static_cast<std::size_t>(c * (pv + 1) + j)] * w;
            wn(loc, deriv_slot(a, c)) = val;
            W(deriv_slot(a, c)) += val;
          }
      }
    // Generalized quotient rule: R^{(k,l)} = (wN^{(k,l)} - sum_{(a,b)!=0} C(k,a)C(l,b) W^{(a,b)} R^{(k-a,l-b)}) / W.
    out.derivs.resize(nloc, nslots);
    const double invW = 1.0 / W(0);
    for (int deg = 0; deg <= d_max; ++deg)
      for (int l = 0; l <= deg; ++l) {
        const int k = deg - l;
        const int slot = deriv_slot(k, l);
        for (int loc = 0; loc < nloc; ++loc) {
          double v = wn(loc, slot);
          for (int a = 0; a <= k; ++a)
            for (int c = 0; c <= l; ++c)
              if (a + c > 0)
                v -= binomial(k, a) * binomial(l, c) * W(deriv_slot(a, c)) * out.derivs(loc, deriv_slot(k - a, l - c));
          out.derivs(loc, slot) = v * invW;
        }
      }
    return out;
  }

  /// Mapping and its parametric derivatives through d_max, via the rational basis.
  GeometryEval eval_geometry(int elem, ParamPoint pt, int d_max) const {
    const BasisEval be = eval_basis(elem, pt, d_max);
    return geometry_from_basis(be);
  }

  GeometryEval geometry_from_basis(const BasisEval& be) const {
    GeometryEval g;
    g.order = be.order;
    g.derivs.assign(static_cast<std::size_t>(deriv_slot_count(be.order)), Vec3::Zero());
    for (int loc = 0; loc < be.size(); ++loc) {
      const Vec3& P = points_[static_cast<std::size_t>(be.indices[static_cast<std::size_t>(loc)])];
      for (int s = 0; s < deriv_slot_count(be.order); ++s) g.derivs[static_cast<std::size_t>(s)] += be.derivs(loc, s) * P;
    }
    if (g.order >= 1) check_nondegenerate(g.d(1, 0), g.d(0, 1));
    return g;
  }

  /// Inserts knot `value` once in direction `dir` (0 = u, 1 = v); geometry is unchanged.
  void insert_knot(int dir, double value) {
    require_open(dir);
    refine_rows(dir, [value](int p, std::vector<double>& U, std::vector<Eigen::Vector4d>& Pw) {
      insert_knot_1d(p, U, Pw, value);
    });
  }

  /// Uniform refinement: inserts knots so that direction `dir` has `spans` equal spans.
  /// Requires a patch with a single span in that direction.
  void refine_uniform(int dir, int spans) {
    const KnotVector& kv = dir == 0 ? ku_ : kv_;
    if (kv.element_spans().size() != 1) throw DomainError("refine_uniform expects a single-span direction");
    const double a = kv.front(), b = kv.back();
    for (int i = 1; i < spans; ++i) insert_knot(dir, a + (b - a) * i / spans);
  }

  /// Raises the degree of a Bezier direction (no interior knots) to `target`.
  void elevate_bezier(int dir, int target) {
    require_open(dir);
    const KnotVector& kv = dir == 0 ? ku_ : kv_;
    if (kv.element_spans().size() != 1) throw DomainError("degree elevation implemented for Bezier directions only");
    if (target < kv.degree()) throw DomainError("cannot lower the degree");
    refine_rows(dir, [target](int p, std::vector<double>& U, std::vector<Eigen::Vector4d>& Pw) {
      for (int q = p; q < target; ++q) {
        std::vector<Eigen::Vector4d> Q(static_cast<std::size_t>(q + 2));
        Q.front() = Pw.front();
        Q.back() = Pw.back();
        for (int i = 1; i <= q; ++i) {
          const double a = static_cast<double>(i) / (q + 1);
          Q[static_cast<std::size_t>(i)] = a * Pw[static_cast<std::size_t>(i - 1)] + (1.0 - a) * Pw[static_cast<std::size_t>(i)];
        }
        Pw = std::move(Q);
        U.insert(U.begin(), U.front());
        U.push_back(U.back());
      }
    });
  }

  friend bool operator==(const NurbsPatch& a, const NurbsPatch& b) {
    return a.ku_.degree() == b.ku_.degree() && a.kv_.degree() == b.kv_.degree() && a.ku_.knots() == b.ku_.knots() &&
           a.kv_.knots() == b.kv_.knots() && a.ku_.periodic() == b.ku_.periodic() &&
           a.kv_.periodic() == b.kv_.periodic() && a.points_ == b.points_ && a.weights_ == b.weights_;
  }

  static void check_nondegenerate(const Vec3& xu, const Vec3& xv) {
    const double c = xu.cross(xv).norm();
    if (!(c >= 1e-12 * xu.norm() * xv.norm()) || c == 0.0) throw NumericalError("degenerate mapping: Jacobian columns parallel");
  }

 private:
  void validate() const {
    const auto expected = static_cast<std::size_t>(count_u() * count_v());
    if (points_.size() != expected)
      throw DomainError("control grid has " + std::to_string(points_.size()) + " points, expected " +
                        std::to_string(expected));
    if (weights_.size() != expected) throw DomainError("weight count does not match control grid");
    for (double w : weights_)
      if (!(w > 0.0)) throw DomainError("weights must be positive");
  }

  void build_elements() {
    elem_u_ = ku_.element_spans();
    elem_v_ = kv_.element_spans();
  }

  void check_element(int elem) const {
    if (elem < 0 || elem >= num_elements()) throw DomainError("element id " + std::to_string(elem) + " out of range");
  }

  void require_open(int dir) const {
    if ((dir == 0 ? ku_ : kv_).periodic()) throw DomainError("refinement of periodic directions is not supported");
  }

  static void insert_knot_1d(int p, std::vector<double>& U, std::vector<Eigen::Vector4d>& Pw, double u) {
    const int n = static_cast<int>(Pw.size()) - 1;
    int k = p;
    while (k < n && U[static_cast<std::size_t>(k + 1)] <= u) ++k;
    std::vector<Eigen::Vector4d> Q(static_cast<std::size_t>(n + 2));
    for (int i = 0; i <= k - p; ++i) Q[static_cast<std::size_t>(i)] = Pw[static_cast<std::size_t>(i)];
    for (int i = k - p + 1; i <= k; ++i) {
      const double a = (u - U[static_cast<std::size_t>(i)]) / (U[static_cast<std::size_t>(i + p)] - U[static_cast<std::size_t>(i)]);
      Q[static_cast<std::size_t>(i)] = a * Pw[static_cast<std::size_t>(i)] + (1.0 - a) * Pw[static_cast<std::size_t>(i - 1)];
    }
    for (int i = k + 1; i <= n + 1; ++i) Q[static_cast<std::size_t>(i)] = Pw[static_cast<std::size_t>(i - 1)];
    Pw = std::move(Q);
    U.insert(U.begin() + k + 1, u);
  }

  /// Applies a 1D homogeneous-coordinate operation to every row of the net along `dir`.
  template <typename Op>
  void refine_rows(int dir, Op op) {
    const KnotVector& kv = dir == 0 ? ku_ : kv_;
    const int nu = count_u(), nv = count_v();
    const int lines = dir == 0 ? nv : nu;
    const int len = dir == 0 ? nu : nv;
    std::vector<std::vector<Eigen::Vector4d>> rows(static_cast<std::size_t>(lines));
    std::vector<double> newU;
    for (int l = 0; l < lines; ++l) {
      std::vector<Eigen::Vector4d> Pw(static_cast<std::size_t>(len));
      for (int k = 0; k < len; ++k) {
        const int g = dir == 0 ? basis_index(k, l) : basis_index(l, k);
        const double w = weights_[static_cast<std::size_t>(g)];
        const Vec3& P = points_[static_cast<std::size_t>(g)];
        Pw[static_cast<std::size_t>(k)] = Eigen::Vector4d(P.x() * w, P.y() * w, P.z() * w, w);
      }
      std::vector<double> U = kv.knots();
      op(kv.degree(), U, Pw);
      rows[static_cast<std::size_t>(l)] = std::move(Pw);
      newU = std::move(U);
    }
    const int newp = static_cast<int>(newU.size()) - static_cast<int>(rows[0].size()) - 1;
    KnotVector nk(newp, newU);
    const int newlen = static_cast<int>(rows[0].size());
    const int nnu = dir == 0 ? newlen : nu, nnv = dir == 0 ? nv : newlen;
    std::vector<Vec3> pts(static_cast<std::size_t>(nnu * nnv));
    std::vector<double> ws(static_cast<std::size_t>(nnu * nnv));
    for (int l = 0; l < lines; ++l)
      for (int k = 0; k < newlen; ++k) {
        const int g = dir == 0 ? k + nnu * l : l + nnu * k;
        const Eigen::Vector4d& h = rows[static_cast<std::size_t>(l)][static_cast<std::size_t>(k)];
        ws[static_cast<std::size_t>(g)] = h.w();
        pts[static_cast<std::size_t>(g)] = h.head<3>() / h.w();
      }
    if (dir == 0) ku_ = std::move(nk);
    else kv_ = std::move(nk);
    points_ = std::move(pts);
    weights_ = std::move(ws);
    validate();
    build_elements();
  }

  KnotVector ku_, kv_;
  std::vector<Vec3> points_;
  std::vector<double> weights_;
  std::vector<int> elem_u_, elem_v_;
};

}  // namespace tdcshell
