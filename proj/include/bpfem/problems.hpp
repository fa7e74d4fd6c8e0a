#pragma once

#include <numbers>
#include <optional>
#include <string>

#include "bpfem/bounds.hpp"

namespace bpfem {

using GradientField = std::function<Point(Point, double)>;

/// du/dt - eps Lap u + beta . grad u + mu u = f on (0,1)^2, u = 0 on the
/// boundary, u(., 0) = u0.
struct ProblemSpec {
  std::string name;
  double epsilon{0.0};
  VectorField beta;
  bool beta_time_dependent{false};
  double mu{0.0};
  ScalarField source;
  bool source_is_zero{false};
  ScalarField initial;
  BoundSpec bounds;
  std::optional<ScalarField> exact;
  std::optional<GradientField> exact_gradient;
};

namespace detail {

inline double slotted_cylinder_cone_hump(Point p) {
  constexpr double r0 = 0.15;
  auto radius = [](Point p, Point c) { return distance(p, c) / r0; };
  {
    const Point c{0.5, 0.75};
    if (radius(p, c) <= 1.0) return (std::abs(p.x - c.x) >= 0.0225 || p.y >= 0.85) ? 1.0 : 0.0;
  }
  {
    const double r = radius(p, {0.5, 0.25});
    if (r <= 1.0) return 1.0 - r;
  }
  {
    const double r = radius(p, {0.25, 0.5});
    if (r <= 1.0) return 0.25 * (1.0 + std::cos(std::numbers::pi * std::min(r, 1.0)));
  }
  return 0.0;
}

}  // namespace detail

/// Smooth benchmark: u = e^t sin(pi x) sin(pi y) with manufactured source.
inline ProblemSpec smooth_problem() {
  using std::numbers::pi;
  ProblemSpec p;
  p.name = "smooth";
  p.epsilon = 1e-6;
  p.mu = 1.0;
  const Point b{2.0, 1.0};
  p.beta = [b](Point, double) { return b; };
  p.exact = [](Point x, double t) { return std::exp(t) * std::sin(pi * x.x) * std::sin(pi * x.y); };
  p.exact_gradient = [](Point x, double t) {
    const double e = std::exp(t) * pi;
    return Point{e * std::cos(pi * x.x) * std::sin(pi * x.y), e * std::sin(pi * x.x) * std::cos(pi * x.y)};
  };
  // u_t = u, -eps Lap u = 2 pi^2 eps u
  p.source = [eps = p.epsilon, mu = p.mu, b](Point x, double t) {
    const double e = std::exp(t);
    const double sx = std::sin(pi * x.x), sy = std::sin(pi * x.y);
    const double u = e * sx * sy;
    const double advection = e * pi * (b.x * std::cos(pi * x.x) * sy + b.y * sx * std::cos(pi * x.y));
    return u * (1.0 + 2.0 * pi * pi * eps + mu) + advection;
  };
  p.initial = [ex = *p.exact](Point x, double) { return ex(x, 0.0); };
  p.bounds = {[](double) { return 0.0; }, [](double t) { return std::exp(t); }};
  return p;
}

/// Counterclockwise solid-body rotation of a slotted cylinder, a cone and a
/// hump; one revolution takes 2 pi. The exact field is the rotated initial
/// datum (diffusion 1e-12 is neglected).
inline ProblemSpec rotation_problem() {
  ProblemSpec p;
  p.name = "rotation";
  p.epsilon = 1e-12;
  p.mu = 0.0;
  p.beta = [](Point x, double) { return Point{0.5 - x.y, x.x - 0.5}; };
  p.source = [](Point, double) { return 0.0; };
  p.source_is_zero = true;
  p.initial = [](Point x, double) { return detail::slotted_cylinder_cone_hump(x); };
  p.exact = [](Point x, double t) {
    const double c = std::cos(t), s = std::sin(t);
    const Point d{x.x - 0.5, x.y - 0.5};
    return detail::slotted_cylinder_cone_hump({0.5 + c * d.x + s * d.y, 0.5 - s * d.x + c * d.y});
  };
  p.bounds = BoundSpec::constant(0.0, 1.0);
  return p;
}

inline ProblemSpec preset(const std::string& name) {
  if (name == "smooth") return smooth_problem();
  if (name == "rotation") return rotation_problem();
  throw InvalidArgument("preset: unknown problem '" + name + "'");
}

}  // namespace bpfem
