#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace tdcshell {

/// Truncated bivariate Taylor polynomial in the parametric coordinates (r, s).
///
/// A Jet of order N carries every mixed partial derivative of a scalar field
/// up to total order N at one point. Coefficients are stored in Taylor form
/// c_{ab} = f^{(a,b)} / (a! b!), ordered by total degree. Arithmetic truncates
/// to the lower order of the two operands, and a parametric derivative lowers
/// the order by one. This is how every higher-order surface derivative in the
/// library is produced: repeated application of the first-order tangential
/// derivative to jets of the geometry and the field.
class Jet {
 public:
  static constexpr int kMaxOrder = 6;
  static constexpr int kCapacity = (kMaxOrder + 1) * (kMaxOrder + 2) / 2;

  static constexpr int index(int a, int b) { return (a + b) * (a + b + 1) / 2 + b; }
  static constexpr int size_for(int order) { return (order + 1) * (order + 2) / 2; }

  Jet() = default;
  explicit Jet(int order) : order_(order) { assert(order >= 0 && order <= kMaxOrder); }

  static Jet constant(double v, int order) {
    Jet j(order);
    j.c_[0] = v;
    return j;
  }

  /// Builds a jet from derivative values d[index(a,b)] = f^{(a,b)}.
  template <typename Range>
  static Jet from_derivatives(const Range& d, int order) {
    Jet j(order);
    for (int a = 0; a <= order; ++a)
      for (int b = 0; a + b <= order; ++b)
        j.c_[index(a, b)] = d[index(a, b)] / (factorial(a) * factorial(b));
    return j;
  }

  int order() const { return order_; }
  double value() const { return c_[0]; }
  double coeff(int a, int b) const { return c_[index(a, b)]; }
  double& coeff(int a, int b) { return c_[index(a, b)]; }
  double derivative(int a, int b) const {
    assert(a + b <= order_);
    return c_[index(a, b)] * factorial(a) * factorial(b);
  }

  Jet truncated(int order) const {
    assert(order <= order_);
    Jet j(order);
    for (int k = 0; k < size_for(order); ++k) j.c_[k] = c_[k];
    return j;
  }

  /// d/dr; result order is one less.
  Jet dr() const {
    assert(order_ >= 1);
    Jet j(order_ - 1);
    for (int a = 0; a < order_; ++a)
      for (int b = 0; a + b < order_; ++b) j.c_[index(a, b)] = (a + 1) * c_[index(a + 1, b)];
    return j;
  }

  /// d/ds; result order is one less.
  Jet ds() const {
    assert(order_ >= 1);
    Jet j(order_ - 1);
    for (int a = 0; a < order_; ++a)
      for (int b = 0; a + b < order_; ++b) j.c_[index(a, b)] = (b + 1) * c_[index(a, b + 1)];
    return j;
  }

  Jet d(int direction) const { return direction == 0 ? dr() : ds(); }

  Jet& operator+=(const Jet& o) {
    order_ = std::min(order_, o.order_);
    for (int k = 0; k < size_for(order_); ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    order_ = std::min(order_, o.order_);
    for (int k = 0; k < size_for(order_); ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(double s) {
    for (int k = 0; k < size_for(order_); ++k) c_[k] *= s;
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator-(Jet a) { return a *= -1.0; }

  friend Jet operator*(const Jet& x, const Jet& y) {
    const int n = std::min(x.order_, y.order_);
    Jet out(n);
    for (const auto& t : product_table(n)) out.c_[t.out] += x.c_[t.lhs] * y.c_[t.rhs];
    return out;
  }

  /// Multiplicative inverse by the quotient-rule recursion in Taylor form.
  Jet reciprocal() const {
    assert(c_[0] != 0.0);
    Jet w(order_);
    const double inv0 = 1.0 / c_[0];
    w.c_[0] = inv0;
    for (int deg = 1; deg <= order_; ++deg)
      for (int b = 0; b <= deg; ++b) {
        const int a = deg - b;
        double acc = 0.0;
        for (int i = 0; i <= a; ++i)
          for (int j = 0; j <= b; ++j)
            if (i + j > 0) acc += c_[index(i, j)] * w.c_[index(a - i, b - j)];
        w.c_[index(a, b)] = -inv0 * acc;
      }
    return w;
  }

  Jet sqrt() const {
    assert(c_[0] > 0.0);
    Jet s(order_);
    s.c_[0] = std::sqrt(c_[0]);
    const double inv2 = 0.5 / s.c_[0];
    for (int deg = 1; deg <= order_; ++deg)
      for (int b = 0; b <= deg; ++b) {
        const int a = deg - b;
        double acc = c_[index(a, b)];
        for (int i = 0; i <= a; ++i)
          for (int j = 0; j <= b; ++j) {
            if ((i == 0 && j == 0) || (i == a && j == b)) continue;
            acc -= s.c_[index(i, j)] * s.c_[index(a - i, b - j)];
          }
        s.c_[index(a, b)] = acc * inv2;
      }
    return s;
  }

  friend Jet operator/(const Jet& x, const Jet& y) { return x * y.reciprocal(); }

  static double factorial(int n) {
    static constexpr std::array<double, 8> f{1, 1, 2, 6, 24, 120, 720, 5040};
    return f[static_cast<std::size_t>(n)];
  }

 private:
  struct Term {
    int out, lhs, rhs;
  };

  static const std::vector<Term>& product_table(int order) {
    static const auto tables = [] {
      std::array<std::vector<Term>, kMaxOrder + 1> t;
      for (int n = 0; n <= kMaxOrder; ++n)
        for (int a1 = 0; a1 <= n; ++a1)
          for (int b1 = 0; a1 + b1 <= n; ++b1)
            for (int a2 = 0; a1 + b1 + a2 <= n; ++a2)
              for (int b2 = 0; a1 + b1 + a2 + b2 <= n; ++b2)
                t[static_cast<std::size_t>(n)].push_back(
                    {index(a1 + a2, b1 + b2), index(a1, b1), index(a2, b2)});
      return t;
    }();
    return tables[static_cast<std::size_t>(order)];
  }

  int order_ = 0;
  std::array<double, kCapacity> c_{};
};

using JetVec = std::array<Jet, 3>;
using JetMat = std::array<std::array<Jet, 3>, 3>;

inline JetVec make_jet_vec(int order) { return {Jet(order), Jet(order), Jet(order)}; }

inline JetMat make_jet_mat(int order) {
  JetMat m;
  for (auto& row : m) row = make_jet_vec(order);
  return m;
}

inline Jet dot(const JetVec& a, const JetVec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline JetVec cross(const JetVec& a, const JetVec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline JetMat matmul(const JetMat& a, const JetMat& b) {
  const int n = std::min(a[0][0].order(), b[0][0].order());
  JetMat out = make_jet_mat(n);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline JetVec matvec(const JetMat& a, const JetVec& v) {
  const int n = std::min(a[0][0].order(), v[0].order());
  JetVec out = make_jet_vec(n);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) out[i] += a[i][k] * v[k];
  return out;
}

}  // namespace tdcshell
