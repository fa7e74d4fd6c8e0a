#pragma once

#include <vector>

#include "bpfem/forms.hpp"
#include "bpfem/problems.hpp"

namespace bpfem {

namespace detail {

/// sum over cells and quadrature points of w * kernel(x, u_h(x), grad u_h(x))
template <class Kernel>
double integrate(const FeFunction& u, int order, Kernel&& kernel) {
  const FeSpace& space = *u.space;
  const Tabulation tab(space.kind, order);
  double total = 0.0;
  for (std::size_t c = 0; c < space.mesh->num_cells(); ++c) {
    const CellMap map = cell_map(*space.mesh, c);
    const auto dofs = space.dofs_of(c);
    double cell_sum = 0.0;
    for (std::size_t q = 0; q < tab.rule.size(); ++q) {
      double value = 0.0;
      Point grad{};
      for (std::size_t a = 0; a < dofs.size(); ++a) {
        value += u[dofs[a]] * tab.values[q][a];
        grad = grad + u[dofs[a]] * map.physical_gradient(tab.gradients[q][a]);
      }
      cell_sum += tab.rule.weights[q] * kernel(map.to_physical(tab.rule.points[q]), value, grad);
    }
    total += cell_sum * std::abs(map.det);
  }
  return total;
}

}  // namespace detail

/// High enough that doubling it moves smooth-field errors by < 1e-10.
inline int default_error_order(const FeSpace& space) { return 2 * space.degree() + 10; }

/// ||u - exact(., t)||_{L2}
inline double l2_error(const FeFunction& u, const ScalarField& exact, double t, int order = 0) {
  if (order <= 0) order = default_error_order(*u.space);
  const double sq = detail::integrate(u, order, [&](Point x, double v, Point) {
    const double e = v - exact(x, t);
    return e * e;
  });
  return std::sqrt(std::max(sq, 0.0));
}

inline double l2_norm(const FeFunction& u, int order = 0) {
  return l2_error(u, [](Point, double) { return 0.0; }, 0.0, order);
}

/// |u - exact(., t)|_{H1}
inline double h1_seminorm_error(const FeFunction& u, const GradientField& exact_gradient, double t, int order = 0) {
  if (order <= 0) order = default_error_order(*u.space);
  const double sq = detail::integrate(u, order, [&](Point x, double, Point g) {
    const Point e = g - exact_gradient(x, t);
    return dot(e, e);
  });
  return std::sqrt(std::max(sq, 0.0));
}

/// Running value of dt sum_n (eps |e_n|_1^2 + mu ||e_n||^2 + J(e_n, e_n))
/// together with the final-time L2 error.
struct ErrorAccumulator {
  double energy_sum{0.0};
  double final_l2{0.0};
  std::vector<double> terms;

  void add(double term) {
    if (!(term >= 0.0)) throw InvalidArgument("ErrorAccumulator: negative or non-finite term");
    terms.push_back(term);
    energy_sum += term;
  }

  /// sqrt(||e_N||^2 + dt sum_n (...))
  double energy_norm() const { return std::sqrt(final_l2 * final_l2 + energy_sum); }
};

/// Adds dt (eps e^T K e + mu e^T M e + e^T J e) for a discrete error field.
inline void accumulate_energy_error(ErrorAccumulator& acc, const FeFunction& e, double eps, double mu, double dt,
                                    const AssembledForms& forms) {
  const Vector& v = e.coefficients;
  const double term = eps * v.dot(forms.stiffness * v) + mu * v.dot(forms.mass * v) + v.dot(forms.cip * v);
  acc.add(dt * std::max(term, 0.0));
}

/// Adds dt (eps |u+ - u|_1^2 + mu ||u+ - u||^2 + J(u+, u+)) against the exact
/// solution; J(u, .) vanishes for the smooth exact field.
inline void accumulate_energy_error_exact(ErrorAccumulator& acc, const FeFunction& u_plus, const ScalarField& exact,
                                          const GradientField& exact_gradient, double t, double eps, double mu,
                                          double dt, const AssembledForms& forms) {
  double term = 0.0;
  if (eps != 0.0) term += eps * std::pow(h1_seminorm_error(u_plus, exact_gradient, t), 2);
  if (mu != 0.0) term += mu * std::pow(l2_error(u_plus, exact, t), 2);
  term += std::max(0.0, u_plus.coefficients.dot(forms.cip * u_plus.coefficients));
  acc.add(dt * term);
}

/// Least-squares slope of log(error) against log(parameter).
inline double convergence_slope(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw InvalidArgument("convergence_slope: need at least two samples");
  double sx = 0.0, sy = 0.0;
  for (const auto& [h, e] : pairs) {
    if (!(h > 0.0) || !(e > 0.0)) throw InvalidArgument("convergence_slope: samples must be positive");
    sx += std::log(h);
    sy += std::log(e);
  }
  const double n = static_cast<double>(pairs.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [h, e] : pairs) {
    sxx += (std::log(h) - mx) * (std::log(h) - mx);
    sxy += (std::log(h) - mx) * (std::log(e) - my);
  }
  if (sxx == 0.0) throw InvalidArgument("convergence_slope: all parameters are equal");
  return sxy / sxx;
}

struct SectionSample {
  double x;
  double value;
};

/// u sampled at npoints equidistant points of the segment y = const, x in [0, 1].
inline std::vector<SectionSample> cross_section(const FeFunction& u, double y, int npoints) {
  if (!(y >= 0.0 && y <= 1.0)) throw InvalidArgument("cross_section: y must lie in [0, 1]");
  if (npoints < 2) throw InvalidArgument("cross_section: need at least two points");
  std::vector<Point> points(npoints);
  for (int i = 0; i < npoints; ++i) points[i] = {static_cast<double>(i) / (npoints - 1), y};
  const auto values = evaluate(u, points);
  std::vector<SectionSample> out(npoints);
  for (int i = 0; i < npoints; ++i) out[i] = {points[i].x, values[i]};
  return out;
}

/// int_Omega u dx, exact for the discrete space.
inline double total_mass(const FeFunction& u) {
  return detail::integrate(u, std::max(u.space->degree(), 1), [](Point, double v, Point) { return v; });
}

inline double relative_mass(const FeFunction& u, double initial_mass) {
  if (initial_mass == 0.0) throw InvalidArgument("relative_mass: initial mass is zero");
  return total_mass(u) / initial_mass;
}

/// Running check of the discrete stability bound of the implicit Euler
/// scheme:
///   max_m ||u+_m||^2 + 2 dt sum_n (eps |u+_n|_1^2 + mu ||u+_n||^2 + J(u+_n, u+_n))
///     <= e^2 (||u_0||^2 + dt T sum_n ||f_n||^2).
struct StabilityMonitor {
  double dt{0.0};
  double final_time{0.0};
  double max_norm_sq{0.0};
  double dissipation{0.0};
  double initial_norm_sq{0.0};
  double source_sum{0.0};
  bool holds{true};
  double worst_ratio{0.0};

  void observe(int step, const FeFunction& u_plus, const FeFunction& u_raw, double source_norm_sq,
               const AssembledForms& forms) {
    const Vector& v = u_plus.coefficients;
    const double norm_sq = v.dot(forms.mass * v);
    if (step == 0) initial_norm_sq = u_raw.coefficients.dot(forms.mass * u_raw.coefficients);
    max_norm_sq = std::max(max_norm_sq, norm_sq);
    dissipation += 2.0 * dt *
                   (forms.epsilon * v.dot(forms.stiffness * v) + forms.mu * norm_sq + v.dot(forms.cip * v));
    source_sum += source_norm_sq;
    const double lhs = max_norm_sq + dissipation;
    const double rhs = std::exp(2.0) * (initial_norm_sq + dt * final_time * source_sum);
    worst_ratio = std::max(worst_ratio, rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? INFINITY : 0.0));
    if (lhs > rhs * (1.0 + 1e-12)) holds = false;
  }
};

}  // namespace bpfem
