#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"

using namespace bpfem;

namespace {

SchemeConfig config(double dt, double T, double theta = 1.0) {
  SchemeConfig c;
  c.dt = dt;
  c.final_time = T;
  c.theta = theta;
  c.gamma = 0.05;
  c.omega = 0.1;
  return c;
}

SpacePtr p1(int n) { return build_space(build_structured_triangular(n), ElementKind::P1); }

ProblemSpec zero_problem() {
  ProblemSpec p = smooth_problem();
  p.source = [](Point, double) { return 0.0; };
  p.source_is_zero = true;
  p.initial = [](Point, double) { return 0.0; };
  return p;
}

// constant source strong enough to push the single unknown past a bound
ProblemSpec forced_problem(double f) {
  ProblemSpec p;
  p.name = "forced";
  p.epsilon = 0.01;
  p.mu = 0.0;
  p.beta = [](Point, double) { return Point{1.0, 0.5}; };
  p.source = [f](Point, double) { return f; };
  p.initial = [](Point, double) { return 0.0; };
  p.bounds = BoundSpec::constant(0.0, 1.0);
  return p;
}

double bisect(const std::function<double(double)>& g, double a, double b) {
  for (int k = 0; k < 200 && b - a > 1e-15; ++k) {
    const double m = 0.5 * (a + b);
    (g(m) > 0.0 ? b : a) = m;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST(StepBp, ZeroIsFixedPoint) {
  const auto problem = zero_problem();
  ThetaStepper stepper(problem, p1(4), config(0.01, 0.01));
  const auto sys = stepper.system_for_step(1);
  const auto [u, report] = step_bp(stepper.initial_condition(), sys, problem.bounds, stepper.config(), 0.01, 1);
  EXPECT_EQ(u.coefficients.norm(), 0.0);
  EXPECT_EQ(report.iterations, 1);
  EXPECT_TRUE(report.admissible);
}

TEST(StepBp, SmoothStepConvergesAndIsAdmissible) {
  const auto problem = smooth_problem();
  ThetaStepper stepper(problem, p1(8), config(1e-3, 1e-3));
  const auto sys = stepper.system_for_step(1);
  const auto u0 = stepper.initial_condition();
  const auto [u, report] = step_bp(u0, sys, problem.bounds, stepper.config(), 1e-3, 1);
  EXPECT_TRUE(report.admissible);
  EXPECT_LE(report.residual, 1e-8);
  EXPECT_LE(report.iterations, stepper.config().max_iter);
  EXPECT_TRUE(is_admissible(split(u, problem.bounds, 1e-3).plus, problem.bounds, 1e-3));
  const Vector r = step_residual(u, u0, sys, problem.bounds, stepper.config(), 1e-3);
  EXPECT_LE(r.lpNorm<Eigen::Infinity>(), 100 * stepper.config().tol);
}

TEST(StepBp, CrankNicolsonStepSatisfiesResidual) {
  const auto problem = smooth_problem();
  ThetaStepper stepper(problem, build_space(build_structured_triangular(6), ElementKind::P2), config(0.01, 0.01, 0.5));
  const auto sys = stepper.system_for_step(1);
  const auto u0 = stepper.initial_condition();
  const auto [u, report] = step_bp(u0, sys, problem.bounds, stepper.config(), 0.01, 1);
  const Vector r = step_residual(u, u0, sys, problem.bounds, stepper.config(), 0.01);
  EXPECT_LE(r.lpNorm<Eigen::Infinity>(), 100 * stepper.config().tol);
}

class ScalarOracle : public ::testing::TestWithParam<std::pair<double, StabDtFactor>> {};

TEST_P(ScalarOracle, MatchesBisection) {
  const auto [f, factor] = GetParam();
  const auto problem = forced_problem(f);
  auto cfg = config(0.1, 0.1);
  // the unscaled stabilisation is 1/dt times stiffer and needs more damping
  cfg.omega = factor == StabDtFactor::dt ? 0.5 : 0.02;
  cfg.tol = 1e-12;
  cfg.max_iter = 100000;
  cfg.stab_dt_factor = factor;
  const auto space = p1(2);
  ASSERT_EQ(space->num_interior(), 1u);
  ThetaStepper stepper(problem, space, cfg);
  const auto sys = stepper.system_for_step(1);
  const auto [u, report] = step_bp(stepper.initial_condition(), sys, problem.bounds, cfg, 0.1, 1);

  const int i = space->interior_dofs.front();
  const double l = oracle::to_dense(theta_operator(*sys.current, 1.0, 0.1))(i, i);
  const double rhs = 0.1 * sys.load[i];
  const double d = (factor == StabDtFactor::dt ? 0.1 : 1.0) * sys.current->stab_diag[i];
  const auto g = [&](double x) {
    const double xp = std::clamp(x, 0.0, 1.0);
    return l * xp + d * (x - xp) - rhs;
  };
  const double x = bisect(g, -1e6, 1e6);
  EXPECT_TRUE(x > 1.0 || x < 0.0);  // the bound is active
  EXPECT_NEAR(u[i], x, 1e-8);
}

INSTANTIATE_TEST_SUITE_P(Forcing, ScalarOracle,
                         ::testing::Values(std::pair{200.0, StabDtFactor::dt}, std::pair{-200.0, StabDtFactor::dt},
                                           std::pair{200.0, StabDtFactor::one}));

TEST(StepBp, NonConvergenceIsReported) {
  const auto problem = smooth_problem();
  auto cfg = config(1e-3, 1e-3);
  cfg.max_iter = 2;
  ThetaStepper stepper(problem, p1(8), cfg);
  const auto sys = stepper.system_for_step(1);
  try {
    step_bp(stepper.initial_condition(), sys, problem.bounds, cfg, 1e-3, 1);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_GT(e.residual(), cfg.tol);
    EXPECT_EQ(e.step(), 1);
  }
  EXPECT_THROW(run(problem, p1(8), cfg), NonConvergence);
}

TEST(StepCip, ZeroData) {
  const auto problem = zero_problem();
  ThetaStepper stepper(problem, p1(4), config(0.01, 0.01));
  const auto u = step_cip(stepper.initial_condition(), stepper.system_for_step(1), stepper.config());
  EXPECT_EQ(u.coefficients.norm(), 0.0);
}

TEST(StepCip, DegenerateOperatorIsIdentity) {
  ProblemSpec problem = zero_problem();
  problem.epsilon = 0.0;
  problem.mu = 0.0;
  problem.beta = [](Point, double) { return Point{0.0, 0.0}; };
  problem.initial = [](Point x, double) { return std::sin(3.0 * x.x) * x.y * (1 - x.y) * (1 - x.x); };
  auto cfg = config(0.01, 0.01);
  cfg.gamma = 0.0;
  ThetaStepper stepper(problem, build_space(build_structured_triangular(5), ElementKind::P2), cfg);
  const auto u0 = stepper.initial_condition();
  const auto u = step_cip(u0, stepper.system_for_step(1), cfg);
  EXPECT_LE((u.coefficients - u0.coefficients).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(StepCip, MatchesDenseSolve) {
  const auto problem = smooth_problem();
  for (double theta : {1.0, 0.5}) {
    const auto space = p1(4);
    const auto cfg = config(0.01, 0.01, theta);
    ThetaStepper stepper(problem, space, cfg);
    const auto sys = stepper.system_for_step(1);
    const auto u0 = stepper.initial_condition();
    const auto u = step_cip(u0, sys, cfg);
    const Eigen::MatrixXd l = oracle::interior_block(oracle::to_dense(theta_operator(*sys.current, theta, 0.01)), *space);
    const Vector f = detail::restrict_to(rhs_Fn(*sys.previous, sys.load, theta, 0.01, u0.coefficients), space->interior_dofs);
    const Vector ref = oracle::dense_lu_solve(l, f);
    EXPECT_LE((u.interior_values() - ref).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(Run, SingleStepWhenFinalTimeEqualsStep) {
  const auto result = run(smooth_problem(), p1(4), config(0.01, 0.01));
  EXPECT_EQ(result.reports.size(), 1u);
  EXPECT_EQ(result.reports.front().step, 1);
}

TEST(Run, ObserverSeesEveryLevel) {
  std::vector<double> times;
  const auto cfg = config(0.01, 0.05);
  run(smooth_problem(), p1(4), cfg, [&](const Snapshot& s) {
    times.push_back(s.time);
    EXPECT_EQ(s.report == nullptr, s.step == 0);
    EXPECT_EQ(&s.approximation, &s.plus);
  });
  ASSERT_EQ(times.size(), 6u);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(times[k], 0.01 * k, 1e-15);
}

TEST(Run, SmoothErrorDecreasesUnderRefinement) {
  const auto problem = smooth_problem();
  const auto cfg = config(1e-3, 0.02);
  double previous = INFINITY;
  for (int n : {4, 8, 16}) {
    const auto result = run(problem, p1(n), cfg);
    const double err = std::sqrt(oracle::fine_integral(result.plus, [&](Point x, double v) {
      return std::pow(v - (*problem.exact)(x, 0.02), 2);
    }));
    EXPECT_LT(err, previous) << n;
    previous = err;
    for (const auto& r : result.reports) EXPECT_TRUE(r.admissible);
  }
}

TEST(Run, RotationIsStronglyStable) {
  const auto problem = rotation_problem();
  auto cfg = config(std::numbers::pi / 2.0 / 785.0, 20 * std::numbers::pi / 2.0 / 785.0);
  cfg.gamma = 0.001;
  cfg.omega = 0.12;
  const auto space = p1(16);
  const SparseMatrix m = assemble_mass(*space);
  std::vector<double> norms;
  double initial = 0.0;
  run(problem, space, cfg, [&](const Snapshot& s) {
    if (s.step == 0) initial = std::sqrt(s.solution.coefficients.dot(m * s.solution.coefficients));
    norms.push_back(std::sqrt(s.plus.coefficients.dot(m * s.plus.coefficients)));
    if (s.report) {
      EXPECT_TRUE(s.report->admissible);
    }
  });
  for (std::size_t k = 1; k < norms.size(); ++k) {
    EXPECT_LE(norms[k], norms[k - 1] + 1e-12) << k;
    EXPECT_LE(norms[k], initial + 1e-12);
  }
}

TEST(Run, StabilityEstimateHolds) {
  const auto problem = smooth_problem();
  const auto cfg = config(0.01, 0.2);
  const auto space = p1(8);
  StabilityMonitor monitor{cfg.dt, cfg.final_time};
  run(problem, space, cfg, [&](const Snapshot& s) {
    double source_sq = 0.0;
    if (s.step > 0)
      source_sq = oracle::fine_integral(s.plus, [&](Point x, double) { return std::pow(problem.source(x, s.time), 2); }, 1);
    monitor.observe(s.step, s.plus, s.solution, source_sq, s.forms);
  });
  EXPECT_TRUE(monitor.holds);
  EXPECT_LT(monitor.worst_ratio, 1.0);
}

TEST(Run, FactorizationReusedForSteadyOperator) {
  const auto result = run(smooth_problem(), p1(6), config(0.01, 0.05));
  EXPECT_EQ(result.factorizations, 1);
}

TEST(Run, FactorizationRefreshedForTimeDependentField) {
  ProblemSpec problem = smooth_problem();
  problem.beta = [](Point, double t) { return Point{2.0 * std::cos(t), 1.0}; };
  problem.beta_time_dependent = true;
  const auto result = run(problem, p1(6), config(0.01, 0.05));
  EXPECT_EQ(result.factorizations, 5);
  for (const auto& r : result.reports) EXPECT_TRUE(r.admissible);
}

TEST(Run, CipSchemeReportsRawSolution) {
  auto cfg = config(0.01, 0.03);
  cfg.scheme = Scheme::cip_only;
  run(smooth_problem(), p1(4), cfg, [&](const Snapshot& s) { EXPECT_EQ(&s.approximation, &s.solution); });
}

TEST(SchemeConfig, Validation) {
  EXPECT_NO_THROW(config(0.1, 1.0).validate());
  EXPECT_EQ(config(0.1, 1.0).num_steps(), 10);
  EXPECT_THROW(config(0.3, 1.0).validate(), InvalidArgument);
  EXPECT_THROW(config(0.1, 1.0, 0.3).validate(), InvalidArgument);
  EXPECT_THROW(config(0.0, 1.0).validate(), InvalidArgument);
  auto c = config(0.1, 1.0);
  c.omega = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = config(0.1, 1.0);
  c.max_iter = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(ThetaStepper(smooth_problem(), p1(2), config(0.3, 1.0)), InvalidArgument);
}
