#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "bpfem/bounds.hpp"
#include "bpfem/forms.hpp"
#include "bpfem/problems.hpp"

namespace bpfem {

enum class Scheme { bound_preserving, cip_only };

/// Scaling of the nodal stabilisation inside the fixed-point iteration:
/// `dt` uses dt * s(u-, v) as in the per-step elliptic problem, `one` uses
/// s(u-, v) unscaled.
enum class StabDtFactor { dt, one };

struct SchemeConfig {
  double theta{1.0};
  double dt{0.0};
  double final_time{0.0};
  double gamma{0.0};
  double alpha{1.0};
  double omega{0.1};
  double tol{1e-8};
  int max_iter{500};
  Scheme scheme{Scheme::bound_preserving};
  StabDtFactor stab_dt_factor{StabDtFactor::dt};

  int num_steps() const { return static_cast<int>(std::llround(final_time / dt)); }

  void validate() const {
    check_theta(theta);
    if (!(dt > 0.0)) throw InvalidArgument("SchemeConfig: dt must be positive");
    if (!(final_time > 0.0)) throw InvalidArgument("SchemeConfig: final time must be positive");
    const double steps = final_time / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9)
      throw InvalidArgument("SchemeConfig: final time is not an integer multiple of dt");
    if (!(gamma >= 0.0)) throw InvalidArgument("SchemeConfig: gamma must be nonnegative");
    if (!(alpha >= 0.0)) throw InvalidArgument("SchemeConfig: alpha must be nonnegative");
    if (!(omega > 0.0 && omega <= 1.0)) throw InvalidArgument("SchemeConfig: omega must lie in (0, 1]");
    if (!(tol > 0.0)) throw InvalidArgument("SchemeConfig: tol must be positive");
    if (max_iter < 1) throw InvalidArgument("SchemeConfig: max_iter must be positive");
  }
};

struct StepReport {
  int step{0};
  int iterations{0};
  double residual{0.0};
  bool admissible{false};
  double plus_l2_norm{0.0};
};

/// Linear algebra shared by the steps of one time level. `previous` holds
/// the forms at t_{n-1}, `current` those at t_n; `solver` factorizes
/// M + dt theta A_J(t_n) restricted to the interior dofs.
struct StepSystem {
  const AssembledForms* current{nullptr};
  const AssembledForms* previous{nullptr};
  const SparseMatrix* interior_mass{nullptr};
  const LinearSolver* solver{nullptr};
  Vector load;  // (f(t_{n-1+theta}), phi_i) on all dofs
};

inline double mass_norm(const SparseMatrix& m, const Vector& v) { return std::sqrt(std::max(0.0, v.dot(m * v))); }

inline SparseMatrix theta_operator(const AssembledForms& forms, double theta, double dt) {
  SparseMatrix l = forms.mass + (dt * theta) * forms.a_j();
  l.makeCompressed();
  return l;
}

namespace detail {

inline Vector restrict_to(const Vector& full, const std::vector<int>& index) {
  Vector r(index.size());
  for (std::size_t k = 0; k < index.size(); ++k) r[k] = full[index[k]];
  return r;
}

inline double stab_factor(const SchemeConfig& cfg) { return cfg.stab_dt_factor == StabDtFactor::dt ? cfg.dt : 1.0; }

}  // namespace detail

/// Residual L u+ + c S u- - F of the per-step nonlinear problem, tested
/// against the interior basis functions.
inline Vector step_residual(const FeFunction& u_n, const FeFunction& u_prev, const StepSystem& sys,
                            const BoundSpec& bounds, const SchemeConfig& cfg, double t_n) {
  const FeSpace& space = *u_n.space;
  const auto [lo_prev, hi_prev] = bounds.at(t_n - cfg.dt);
  Vector prev_plus;
  clip(u_prev.coefficients, lo_prev, hi_prev, prev_plus);
  const Vector f = detail::restrict_to(rhs_Fn(*sys.previous, sys.load, cfg.theta, cfg.dt, prev_plus), space.interior_dofs);
  const auto [lo, hi] = bounds.at(t_n);
  const Vector x = u_n.interior_values();
  Vector xp;
  clip(x, lo, hi, xp);
  const Vector d = detail::restrict_to(sys.current->stab_diag, space.interior_dofs);
  return sys.solver->matrix() * xp + detail::stab_factor(cfg) * d.cwiseProduct(x - xp) - f;
}

/// One bound-preserving theta step solved by the damped Richardson iteration
///   L u~_{m+1} = L u~_m + omega (F - L (u~_m)+ - dt S (u~_m)-),
/// L = M + dt theta A_J, started from u_prev and stopped once the L2 norm of
/// the update drops below tol.
inline std::pair<FeFunction, StepReport> step_bp(const FeFunction& u_prev, const StepSystem& sys,
                                                 const BoundSpec& bounds, const SchemeConfig& cfg, double t_n,
                                                 int step = 0) {
  const FeSpace& space = *u_prev.space;
  const auto& interior = space.interior_dofs;

  const auto [lo_prev, hi_prev] = bounds.at(t_n - cfg.dt);
  Vector prev_plus;
  clip(u_prev.coefficients, lo_prev, hi_prev, prev_plus);
  const Vector f = detail::restrict_to(rhs_Fn(*sys.previous, sys.load, cfg.theta, cfg.dt, prev_plus), interior);

  const auto [lo, hi] = bounds.at(t_n);
  const SparseMatrix& l = sys.solver->matrix();
  const Vector stab = detail::stab_factor(cfg) * detail::restrict_to(sys.current->stab_diag, interior);

  Vector x = u_prev.interior_values();
  Vector xp;
  StepReport report;
  report.step = step;
  bool converged = false;
  for (int m = 0; m < cfg.max_iter; ++m) {
    clip(x, lo, hi, xp);
    const Vector r = f - l * xp - stab.cwiseProduct(x - xp);
    const Vector dx = cfg.omega * sys.solver->solve(r);
    x += dx;
    report.iterations = m + 1;
    report.residual = mass_norm(*sys.interior_mass, dx);
    if (!std::isfinite(report.residual)) break;
    if (report.residual <= cfg.tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NonConvergence("step_bp: Richardson iteration did not converge at step " + std::to_string(step) +
                             " (last update norm " + std::to_string(report.residual) + ")",
                         report.residual, step);

  FeFunction u_n(u_prev.space);
  u_n.set_interior_values(x);
  clip(x, lo, hi, xp);
  // boundary dofs carry the homogeneous Dirichlet value
  report.admissible = is_admissible(xp, lo, hi) && lo <= 0.0 && 0.0 <= hi;
  report.plus_l2_norm = mass_norm(*sys.interior_mass, xp);
  return {std::move(u_n), report};
}

/// One step of the linear CIP-stabilised theta scheme
///   (u_n - u_{n-1}, v) + dt theta a_J(u_n, v) + dt (1 - theta) a_J(u_{n-1}, v) = dt (f, v).
inline FeFunction step_cip(const FeFunction& u_prev, const StepSystem& sys, const SchemeConfig& cfg) {
  const FeSpace& space = *u_prev.space;
  const Vector f =
      detail::restrict_to(rhs_Fn(*sys.previous, sys.load, cfg.theta, cfg.dt, u_prev.coefficients), space.interior_dofs);
  FeFunction u_n(u_prev.space);
  u_n.set_interior_values(sys.solver->solve(f));
  return u_n;
}

/// State handed to run() observers after the initial condition and after
/// every step. `approximation` is the constrained part for the
/// bound-preserving scheme and the raw solution for the CIP scheme.
struct Snapshot {
  int step;
  double time;
  const FeFunction& solution;
  const FeFunction& plus;
  const FeFunction& approximation;
  const AssembledForms& forms;
  const StepReport* report;  // null for the initial condition
};

using Observer = std::function<void(const Snapshot&)>;

struct RunResult {
  FeFunction solution;
  FeFunction plus;
  std::vector<StepReport> reports;
  int factorizations{0};
};

/// Owns the assembled forms and the factorized step operator of a run;
/// both are reused across steps when beta does not depend on time.
class ThetaStepper {
 public:
  ThetaStepper(const ProblemSpec& problem, SpacePtr space, SchemeConfig cfg)
      : problem_(problem), space_(std::move(space)), cfg_(cfg), hfun_(compute_mesh_function(*space_->mesh)) {
    cfg_.validate();
    interior_mass_ = submatrix(assemble_mass(*space_), space_->interior_dofs);
  }

  const SchemeConfig& config() const { return cfg_; }
  const FeSpace& space() const { return *space_; }
  const MeshFunction& mesh_function() const { return hfun_; }
  int factorizations() const { return factorizations_; }

  /// Forms at level time t. Assembly never evicts `keep`.
  const AssembledForms& forms_at(double t, const AssembledForms* keep = nullptr) {
    if (!problem_.beta_time_dependent) t = 0.0;
    for (auto& slot : forms_)
      if (slot && slot->time == t) return *slot;
    auto& slot = (forms_[0] && &*forms_[0] == keep) ? forms_[1] : forms_[0];
    slot = assemble_forms(*space_, hfun_, parameters(), t, cfg_.dt);
    return *slot;
  }

  StepSystem system_for_step(int n) {
    const double t_n = n * cfg_.dt;
    const double t_prev = (n - 1) * cfg_.dt;
    StepSystem sys;
    sys.previous = &forms_at(t_prev);
    sys.current = &forms_at(t_n, sys.previous);
    const double key = problem_.beta_time_dependent ? t_n : 0.0;
    if (!operator_time_ || *operator_time_ != key) {
      solver_.factorize(submatrix(theta_operator(*sys.current, cfg_.theta, cfg_.dt), space_->interior_dofs));
      operator_time_ = key;
      ++factorizations_;
    }
    sys.solver = &solver_;
    sys.interior_mass = &interior_mass_;
    const double t_mid = cfg_.theta * t_n + (1.0 - cfg_.theta) * t_prev;
    sys.load = problem_.source_is_zero ? Vector::Zero(space_->num_dofs()) : assemble_load(*space_, problem_.source, t_mid);
    return sys;
  }

  FeFunction initial_condition() const {
    FeFunction u0 = interpolate(space_, problem_.initial, 0.0);
    u0.zero_boundary();
    return u0;
  }

 private:
  FormParameters parameters() const {
    return {problem_.epsilon, problem_.mu, problem_.beta, cfg_.gamma, cfg_.alpha};
  }

  ProblemSpec problem_;
  SpacePtr space_;
  SchemeConfig cfg_;
  MeshFunction hfun_;
  SparseMatrix interior_mass_;
  std::array<std::optional<AssembledForms>, 2> forms_;
  LinearSolver solver_;
  std::optional<double> operator_time_;
  int factorizations_{0};
};

/// Advances u0 = i_h u^0 through T/dt steps, notifying the observer after
/// the initial condition and after each step.
inline RunResult run(const ProblemSpec& problem, SpacePtr space, const SchemeConfig& cfg, const Observer& observer = {}) {
  ThetaStepper stepper(problem, space, cfg);
  RunResult result;
  FeFunction u = stepper.initial_condition();
  auto plus_of = [&](const FeFunction& v, double t) { return split(v, problem.bounds, t).plus; };

  {
    const FeFunction plus = plus_of(u, 0.0);
    const FeFunction& approx = cfg.scheme == Scheme::bound_preserving ? plus : u;
    if (observer) observer({0, 0.0, u, plus, approx, stepper.forms_at(0.0), nullptr});
  }

  const int steps = cfg.num_steps();
  result.reports.reserve(steps);
  for (int n = 1; n <= steps; ++n) {
    const double t_n = n * cfg.dt;
    StepSystem sys;
    try {
      sys = stepper.system_for_step(n);
    } catch (const SolverFailure& e) {
      throw SolverFailure(std::string(e.what()) + " at step " + std::to_string(n), e.residual());
    }
    StepReport report;
    try {
      if (cfg.scheme == Scheme::bound_preserving) {
        auto [next, rep] = step_bp(u, sys, problem.bounds, cfg, t_n, n);
        u = std::move(next);
        report = rep;
      } else {
        u = step_cip(u, sys, cfg);
        report.step = n;
        report.iterations = 1;
        const auto [lo, hi] = problem.bounds.at(t_n);
        report.admissible = is_admissible(u.coefficients, lo, hi);
        report.plus_l2_norm = mass_norm(*sys.interior_mass, u.interior_values());
      }
    } catch (const SolverFailure& e) {
      throw SolverFailure(std::string(e.what()) + " at step " + std::to_string(n), e.residual());
    }
    result.reports.push_back(report);
    if (observer) {
      const FeFunction plus = plus_of(u, t_n);
      const FeFunction& approx = cfg.scheme == Scheme::bound_preserving ? plus : u;
      observer({n, t_n, u, plus, approx, *sys.current, &result.reports.back()});
    }
  }
  result.plus = plus_of(u, steps * cfg.dt);
  result.solution = std::move(u);
  result.factorizations = stepper.factorizations();
  return result;
}

}  // namespace bpfem
