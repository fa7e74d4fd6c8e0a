#pragma once

#include <cmath>
#include <functional>

#include "bpfem/fe_space.hpp"

namespace bpfem {

/// Time-dependent bounds lower(t) <= u <= upper(t), constant in space.
struct BoundSpec {
  std::function<double(double)> lower = [](double) { return 0.0; };
  std::function<double(double)> upper = [](double) { return 1.0; };

  static BoundSpec constant(double lo, double hi) {
    return {[lo](double) { return lo; }, [hi](double) { return hi; }};
  }

  std::pair<double, double> at(double t) const {
    const double lo = lower(t), hi = upper(t);
    if (!(lo < hi)) throw InvalidArgument("BoundSpec: lower bound is not below the upper bound at t = " + std::to_string(t));
    return {lo, hi};
  }
};

/// u = plus + minus with plus the nodal clipping of u into the bounds.
struct SplitFunction {
  FeFunction plus;
  FeFunction minus;
};

inline void clip(const Vector& u, double lo, double hi, Vector& plus) {
  plus = u.array().min(hi).max(lo);
}

/// minus is nudged by a few ulps where needed so that plus + minus
/// reproduces u bitwise.
inline SplitFunction split(const FeFunction& u, const BoundSpec& bounds, double t) {
  const auto [lo, hi] = bounds.at(t);
  SplitFunction s{FeFunction(u.space), FeFunction(u.space)};
  clip(u.coefficients, lo, hi, s.plus.coefficients);
  s.minus.coefficients = u.coefficients - s.plus.coefficients;
  for (Eigen::Index i = 0; i < u.coefficients.size(); ++i) {
    const double target = u.coefficients[i], p = s.plus.coefficients[i];
    double& m = s.minus.coefficients[i];
    for (int k = 0; k < 4 && p + m != target; ++k)
      m = std::nextafter(m, p + m < target ? INFINITY : -INFINITY);
  }
  return s;
}

inline constexpr double kAdmissibleTolerance = 1e-13;

inline bool is_admissible(const Vector& values, double lo, double hi, double tol = kAdmissibleTolerance) {
  return values.size() == 0 || (values.minCoeff() >= lo - tol && values.maxCoeff() <= hi + tol);
}

inline bool is_admissible(const FeFunction& u, const BoundSpec& bounds, double t) {
  const auto [lo, hi] = bounds.at(t);
  return is_admissible(u.coefficients, lo, hi);
}

}  // namespace bpfem
