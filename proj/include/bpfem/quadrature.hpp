#pragma once

#include <numbers>
#include <vector>

#include "bpfem/mesh.hpp"

namespace bpfem {

struct QuadratureRule {
  std::vector<Point> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

struct LineRule {
  std::vector<double> points;  // on [0,1]
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

inline constexpr int kMaxQuadratureOrder = 40;

/// m-point Gauss-Legendre rule mapped to [0,1]; exact to degree 2m-1.
inline LineRule gauss_legendre(int m) {
  if (m < 1) throw InvalidArgument("gauss_legendre: need at least one point");
  LineRule rule;
  rule.points.resize(m);
  rule.weights.resize(m);
  // Legendre P_m(x) and P_m'(x) by the three-term recurrence
  auto legendre = [m](double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= m; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, m * (x * p1 - p0) / (x * x - 1.0)};
  };
  for (int i = 0; i < m; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    rule.points[m - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[m - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

/// Gauss rule on [0,1] exact for polynomials of degree <= order.
inline LineRule line_quadrature(int order) {
  if (order < 1 || order > kMaxQuadratureOrder)
    throw InvalidArgument("line_quadrature: unsupported order " + std::to_string(order));
  return gauss_legendre((order + 2) / 2);
}

/// Rule on the reference cell exact for polynomials of total degree <= order.
/// Reference triangle: (0,0),(1,0),(0,1). Reference square: [0,1]^2.
/// Triangle rules are collapsed (Duffy) tensor Gauss rules.
inline QuadratureRule quadrature(CellKind kind, int order) {
  if (order < 1 || order > kMaxQuadratureOrder)
    throw InvalidArgument("quadrature: unsupported order " + std::to_string(order));
  QuadratureRule rule;
  if (kind == CellKind::quadrilateral) {
    const LineRule g = gauss_legendre((order + 2) / 2);
    for (std::size_t j = 0; j < g.size(); ++j)
      for (std::size_t i = 0; i < g.size(); ++i) {
        rule.points.push_back({g.points[i], g.points[j]});
        rule.weights.push_back(g.weights[i] * g.weights[j]);
      }
    return rule;
  }
  // the collapse adds one degree in the first direction
  const LineRule gu = gauss_legendre((order + 3) / 2);
  const LineRule gv = gauss_legendre((order + 2) / 2);
  for (std::size_t i = 0; i < gu.size(); ++i)
    for (std::size_t j = 0; j < gv.size(); ++j) {
      const double u = gu.points[i];
      const double v = gv.points[j];
      rule.points.push_back({u, v * (1.0 - u)});
      rule.weights.push_back(gu.weights[i] * gv.weights[j] * (1.0 - u));
    }
  return rule;
}

}  // namespace bpfem
