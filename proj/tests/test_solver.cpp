#include <gtest/gtest.h>

#include "support.hpp"

using namespace penalflow;

namespace {

FlowProblem problem(const Mesh& mesh, Coefficients c, double peak = 100.0) {
  FlowProblem p;
  p.disc = make_discretization(mesh);
  p.coeffs = c;
  p.bcs.inflow_peak = peak;
  return p;
}

const Mesh& small_box() {
  static const Mesh m = generate_mesh(make_geometry(CaseId::BoxWall), 0.15);
  return m;
}

double poiseuille_error(const FlowProblem& p, const Solution& s) {
  const Spaces& sp = p.disc->spaces();
  double err = 0.0;
  for (int i = 0; i < sp.n_nodes(); ++i) {
    const Point x = sp.node_coords[static_cast<std::size_t>(i)];
    err = std::max(err, std::abs(s.velocity[sp.velocity_dof(i, 0)] - pftest::poiseuille_u(x)));
    err = std::max(err, std::abs(s.velocity[sp.velocity_dof(i, 1)]));
  }
  for (int v = 0; v < sp.n_vertices; ++v)
    err = std::max(err, std::abs(s.pressure[v] - pftest::poiseuille_p(p.disc->mesh().vertices[static_cast<std::size_t>(v)])));
  return err / 800.0;  // relative to the largest pressure
}

}  // namespace

TEST(Solver, ZeroInflowGivesZero) {
  const FlowProblem p = problem(small_box(), Coefficients::volume(1.0, 1e4), 0.0);
  const Solution s = continuation_solve(p);
  EXPECT_TRUE(s.diagnostics.converged);
  EXPECT_LE(s.velocity.lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_LE(s.pressure.lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Solver, PoiseuilleExact) {
  const FlowProblem p = problem(pftest::coarse_channel(), Coefficients::real(1.0));
  const Solution stokes = solve_stokes(p);
  EXPECT_LE(poiseuille_error(p, stokes), 1e-8);
  const Solution s = newton_solve(p, stokes);
  EXPECT_TRUE(s.diagnostics.converged);
  EXPECT_LE(s.diagnostics.newton_iterations, 1);
  EXPECT_LE(poiseuille_error(p, s), 1e-8);
}

TEST(Solver, PenalizedNoObstacleEqualsReal) {
  const FlowProblem real = problem(pftest::coarse_channel(), Coefficients::real(1.0));
  const Solution ref = continuation_solve(real);
  for (const auto& c : {Coefficients::volume(1.0, 1e8), Coefficients::viscosity(1.0, 1e8),
                        Coefficients::mixed(1.0, 1e6, 1e8)}) {
    FlowProblem p = real;
    p.coeffs = c;
    const Solution s = continuation_solve(p);
    EXPECT_LE((s.velocity - ref.velocity).lpNorm<Eigen::Infinity>(), 1e-8);
  }
}

TEST(Solver, NewtonFromExactSolution) {
  const FlowProblem p = problem(small_box(), Coefficients::viscosity(1.0, 1e2));
  const Solution s = continuation_solve(p);
  const Solution again = newton_solve(p, s);
  EXPECT_TRUE(again.diagnostics.converged);
  EXPECT_LE(again.diagnostics.newton_iterations, 1);
}

TEST(Solver, QuadraticConvergence) {
  const Mesh sub = extract_fluid_submesh(small_box()).fluid;
  const FlowProblem p = problem(sub, Coefficients::real(1.0));
  const Solution s = newton_solve(p, solve_stokes(p));
  ASSERT_TRUE(s.diagnostics.converged);
  EXPECT_LE(s.diagnostics.newton_iterations, 20);
  EXPECT_TRUE(verify_certificate(p, s));
}

TEST(Solver, RealSchemeRejectsSolidMesh) {
  const FlowProblem p = problem(small_box(), Coefficients::real(1.0));
  EXPECT_THROW(continuation_solve(p), InvalidInput);
}

TEST(Solver, NanInitialGuessRejected) {
  const FlowProblem p = problem(pftest::coarse_channel(), Coefficients::real(1.0));
  Solution init = solve_stokes(p);
  init.velocity[0] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(newton_solve(p, init), NumericError);
}

TEST(Continuation, DefaultLadder) {
  const auto l = default_ladder(Coefficients::mixed(1.0, 1e8, 1e10), 1e2, 1e2);
  ASSERT_FALSE(l.empty());
  EXPECT_EQ(l.back(), (std::pair<double, double>(1e8, 1e10)));
  for (std::size_t i = 1; i < l.size(); ++i) {
    EXPECT_NEAR(l[i].second / l[i - 1].second, 1e2, 1e-6);
    EXPECT_NEAR(l[i].second / l[i].first, 1e2, 1e-6);
  }
  EXPECT_EQ(default_ladder(Coefficients::viscosity(1.0, 50.0), 1e2, 1e2).size(), 1u);
  EXPECT_EQ(default_ladder(Coefficients::real(1.0), 1e2, 1e2).size(), 1u);
}

TEST(Continuation, SingleStageMatchesNewton) {
  const FlowProblem p = problem(small_box(), Coefficients::volume(1.0, 1e3));
  SolverConfig cfg;
  cfg.ladder = {{1.0, 1e3}};
  const Solution a = continuation_solve(p, cfg);
  const Solution b = newton_solve(p, solve_stokes(p));
  EXPECT_EQ(a.diagnostics.stages, 1);
  EXPECT_EQ((a.state() - b.state()).lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Continuation, PathIndependence) {
  const FlowProblem p = problem(small_box(), Coefficients::mixed(1.0, 1e6, 1e8));
  SolverConfig fine, coarse;
  fine.continuation_ratio = 1e2;
  coarse.continuation_ratio = 1e4;
  const Solution a = continuation_solve(p, fine);
  const Solution b = continuation_solve(p, coarse);
  EXPECT_GT(a.diagnostics.stages, b.diagnostics.stages);
  const Spaces& sp = p.disc->spaces();
  const double diff = norm_l2(a.velocity - b.velocity, sp, p.disc->mesh());
  EXPECT_LE(diff / norm_l2(a.velocity, sp, p.disc->mesh()).value, 1e-8);
}

TEST(Continuation, LadderMustEndAtTarget) {
  const FlowProblem p = problem(small_box(), Coefficients::volume(1.0, 1e4));
  SolverConfig cfg;
  cfg.ladder = {{1.0, 1e2}, {1.0, 1e3}};
  EXPECT_THROW(continuation_solve(p, cfg), ConfigError);
  cfg.ladder = {{1.0, 1e3}, {1.0, 1e2}, {1.0, 1e4}};
  EXPECT_THROW(continuation_solve(p, cfg), ConfigError);
}

TEST(Continuation, StageFailureCarriesLastStage) {
  const FlowProblem p = problem(small_box(), Coefficients::volume(1.0, 1e6));
  SolverConfig cfg;
  cfg.ladder = {{1.0, 1e2}, {1.0, 1e6}};
  cfg.max_newton_iterations = 1;
  cfg.newton_tol = 1e-14;
  cfg.abs_tol = 0.0;
  try {
    continuation_solve(p, cfg);
    FAIL() << "expected a continuation error";
  } catch (const ContinuationError& e) {
    EXPECT_EQ(e.exit_code(), ExitCode::Solver);
    EXPECT_NE(std::string(e.what()).find("stage"), std::string::npos);
    if (e.stage() == 2) {
      ASSERT_TRUE(e.last_converged());
      EXPECT_DOUBLE_EQ(e.last_converged()->n, 1e2);
    }
  }
}

TEST(Solver, VolumePenaltySuppressesSolidVelocity) {
  const FlowProblem p = problem(small_box(), Coefficients::volume(1.0, 1e10));
  const Solution s = continuation_solve(p);
  ASSERT_TRUE(s.diagnostics.converged);
  const auto& sp = p.disc->spaces();
  const auto& m = p.disc->mesh();
  EXPECT_LE(norm_l2(s.velocity, sp, m, Region::solid()).value, 1e-3 * norm_l2(s.velocity, sp, m).value);
  EXPECT_TRUE(verify_certificate(p, s));
  for (int it : s.diagnostics.stage_iterations) EXPECT_LE(it, 50);
}

TEST(Solver, ConfigValidation) {
  SolverConfig c;
  c.newton_tol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.continuation_ratio = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(Coefficients::viscosity(1.0, 0.5).validate(), ConfigError);
  EXPECT_THROW(Coefficients::volume(1.0, -1.0).validate(), ConfigError);
}

TEST(Solver, RoundoffFloorStopsStagnation) {
  // Free-floating disk: solid velocity stays O(1) and m K u cancels to round-off.
  static const Mesh m = generate_mesh(make_geometry(CaseId::TwoObstacles, 16), 0.2);
  const FlowProblem p = problem(m, Coefficients::viscosity(1.0, 1e10));
  SolverConfig strict;
  strict.roundoff_factor = 0.0;
  strict.abs_tol = 0.0;
  strict.newton_tol = 1e-14;
  strict.max_newton_iterations = 8;
  EXPECT_THROW(continuation_solve(p, strict), ContinuationError);
  const Solution s = continuation_solve(p);
  ASSERT_TRUE(s.diagnostics.converged);
  EXPECT_TRUE(verify_certificate(p, s));
  EXPECT_GT(s.diagnostics.roundoff_floor, 0.0);
  for (int it : s.diagnostics.stage_iterations) EXPECT_LE(it, 10);
}
