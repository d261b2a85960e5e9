#pragma once

#include "tdcshell/common.hpp"
#include "tdcshell/nurbs.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace tdcshell {

struct GaussLegendre1D {
  std::vector<double> points;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1], 1 <= n <= 16.
inline GaussLegendre1D gauss_legendre(int n) {
  if (n < 1 || n > 16) throw DomainError("Gauss rule size " + std::to_string(n) + " out of range [1, 16]");
  if (n == 1) return {{0.0}, {2.0}};
  GaussLegendre1D g;
  g.points.resize(static_cast<std::size_t>(n));
  g.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    g.points[static_cast<std::size_t>(i)] = -x;
    g.points[static_cast<std::size_t>(n - 1 - i)] = x;
    g.weights[static_cast<std::size_t>(i)] = w;
    g.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  if (n % 2 == 1) g.points[static_cast<std::size_t>(n / 2)] = 0.0;
  return g;
}

/// Tensor-product rule on the reference square [-1, 1]^2.
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(points.size()); }

  /// Parametric point and scaled weight for quadrature point q on an element.
  ParamPoint map(int q, const ElementBounds& b) const {
    const Vec2& x = points[static_cast<std::size_t>(q)];
    return {0.5 * (b.u0 + b.u1) + 0.5 * (b.u1 - b.u0) * x.x(), 0.5 * (b.v0 + b.v1) + 0.5 * (b.v1 - b.v0) * x.y()};
  }
  double scaled_weight(int q, const ElementBounds& b) const {
    return weights[static_cast<std::size_t>(q)] * 0.25 * (b.u1 - b.u0) * (b.v1 - b.v0);
  }
};

inline QuadratureRule gauss_rule(int n_points_per_dir) {
  const GaussLegendre1D g = gauss_legendre(n_points_per_dir);
  QuadratureRule rule;
  for (int j = 0; j < n_points_per_dir; ++j)
    for (int i = 0; i < n_points_per_dir; ++i) {
      rule.points.emplace_back(g.points[static_cast<std::size_t>(i)], g.points[static_cast<std::size_t>(j)]);
      rule.weights.push_back(g.weights[static_cast<std::size_t>(i)] * g.weights[static_cast<std::size_t>(j)]);
    }
  return rule;
}

}  // namespace tdcshell
