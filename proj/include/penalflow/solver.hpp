#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "penalflow/assembly.hpp"
#include "penalflow/errors.hpp"
#include "penalflow/linear_solver.hpp"
#include "penalflow/mesh.hpp"
#include "penalflow/problem.hpp"
#include "penalflow/spaces.hpp"

namespace penalflow {

/// A mesh with its function spaces and cached assembler. Not copyable or
/// movable because the assembler refers to the owned mesh and spaces; share it
/// through make_discretization.
class Discretization {
 public:
  explicit Discretization(Mesh mesh)
      : mesh_(std::move(mesh)), spaces_(build_spaces(mesh_)), assembler_(mesh_, spaces_) {}
  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;

  const Mesh& mesh() const { return mesh_; }
  const Spaces& spaces() const { return spaces_; }
  const Assembler& assembler() const { return assembler_; }

 private:
  Mesh mesh_;
  Spaces spaces_;
  Assembler assembler_;
};

using DiscretizationPtr = std::shared_ptr<const Discretization>;

inline DiscretizationPtr make_discretization(Mesh mesh) {
  return std::make_shared<const Discretization>(std::move(mesh));
}

/// Everything that defines one nonlinear system.
struct FlowProblem {
  DiscretizationPtr disc;
  Coefficients coeffs;
  BoundaryConditions bcs;
  VectorFunction body_force;
};

using LogSink = std::function<void(const std::string&)>;

struct SolverConfig {
  double newton_tol = 1e-10;  ///< on ||F(U_k)||_inf / ||F(U_0)||_inf
  /// Absolute floor on ||F(U_k)||_inf, relative to the load scale ||F(0)||_inf.
  /// Lets an iterate that already solves the system stop without reaching the
  /// relative tolerance. Zero disables the floor.
  double abs_tol = 1e-13;
  /// Accept ||F||_inf <= roundoff_factor * eps * || |J| |U| ||_inf, the size of
  /// the floating-point error in evaluating F itself. Zero disables the test.
  double roundoff_factor = 10.0;
  int max_newton_iterations = 50;
  /// Explicit (m, n) stages for continuation; empty means the default ladder.
  std::vector<std::pair<double, double>> ladder;
  double continuation_ratio = 1e2;
  double continuation_start = 1e2;
  LinearPolicy linear_policy = LinearPolicy::Direct;
  double linear_tol = 1e-12;
  int threads = 1;
  LogSink log;

  void validate() const {
    if (!(newton_tol > 0.0)) throw ConfigError("newton tolerance must be positive");
    if (!(abs_tol >= 0.0)) throw ConfigError("newton absolute tolerance must be >= 0");
    if (!(roundoff_factor >= 0.0)) throw ConfigError("newton roundoff factor must be >= 0");
    if (max_newton_iterations < 1) throw ConfigError("newton max iterations must be >= 1");
    if (!(continuation_ratio > 1.0)) throw ConfigError("continuation ratio must be > 1");
    if (!(continuation_start > 0.0)) throw ConfigError("continuation start must be positive");
    for (std::size_t i = 1; i < ladder.size(); ++i)
      if (!(std::max(ladder[i].first, ladder[i].second) > std::max(ladder[i - 1].first, ladder[i - 1].second)))
        throw ConfigError("continuation ladder must be strictly increasing in max(m, n)");
  }
};

/// Stage failure during continuation. Carries the last converged stage.
class ContinuationError : public Error {
 public:
  ContinuationError(const std::string& what, int stage, double m, double n,
                    std::shared_ptr<const Solution> last)
      : Error("continuation", what, ExitCode::Solver), stage_(stage), m_(m), n_(n), last_(std::move(last)) {}
  int stage() const noexcept { return stage_; }
  double stage_m() const noexcept { return m_; }
  double stage_n() const noexcept { return n_; }
  /// Null when the first stage failed.
  const std::shared_ptr<const Solution>& last_converged() const noexcept { return last_; }

 private:
  int stage_;
  double m_;
  double n_;
  std::shared_ptr<const Solution> last_;
};

namespace detail {

inline AssemblyOptions assembly_options(const FlowProblem& p, bool convection) {
  AssemblyOptions o;
  o.convection = convection;
  o.body_force = p.body_force;
  return o;
}

inline void check_problem(const FlowProblem& p) {
  if (!p.disc) throw InvalidInput("flow problem has no discretization");
  p.coeffs.validate();
  if (p.coeffs.scheme == Scheme::Real) {
    for (std::size_t t = 0; t < p.disc->mesh().triangles.size(); ++t)
      if (p.disc->mesh().is_solid(t))
        throw InvalidInput("the real-obstacle problem must be posed on the fluid submesh");
  }
}

inline Solution make_solution(const FlowProblem& p, const Eigen::VectorXd& state) {
  Solution s;
  s.set_state(state, p.disc->spaces().n_u());
  s.scheme = p.coeffs.scheme;
  s.m = p.coeffs.m;
  s.n = p.coeffs.n;
  return s;
}

inline std::string format_residual(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", r);
  return buf;
}

}  // namespace detail

/// ||F(U)||_inf of the full (uneliminated) residual.
inline double residual_norm(const FlowProblem& p, const Eigen::VectorXd& state) {
  const DirichletSet dir = collect_dirichlet(p.disc->mesh(), p.disc->spaces(), p.bcs);
  return p.disc->assembler().assemble(p.coeffs, state, dir, detail::assembly_options(p, true)).residual.lpNorm<Eigen::Infinity>();
}

/// Linear Stokes problem (convection dropped) with the same viscosity,
/// friction and boundary data.
inline Solution solve_stokes(const FlowProblem& p, const SolverConfig& cfg = {}) {
  detail::check_problem(p);
  const Spaces& sp = p.disc->spaces();
  const DirichletSet dir = collect_dirichlet(p.disc->mesh(), sp, p.bcs);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(sp.n_total());
  AssembledSystem sys = apply_dirichlet(p.disc->assembler().assemble(p.coeffs, zero, dir, detail::assembly_options(p, false)));
  LinearSolver lin(cfg.linear_policy, cfg.linear_tol);
  const Eigen::VectorXd d = lin.solve(sys.jacobian, sys.residual);
  Solution s = detail::make_solution(p, zero + d);
  s.diagnostics.converged = true;
  s.diagnostics.threads = cfg.threads;
  return s;
}

/// Full-step Newton iteration from `initial`.
inline Solution newton_solve(const FlowProblem& p, const Solution& initial, const SolverConfig& cfg = {}) {
  detail::check_problem(p);
  cfg.validate();
  const Spaces& sp = p.disc->spaces();
  const Assembler& asmb = p.disc->assembler();
  Eigen::VectorXd U = initial.state();
  if (U.size() != sp.n_total())
    throw InvalidInput("initial guess has " + std::to_string(U.size()) + " entries, expected " +
                       std::to_string(sp.n_total()));
  if (!U.allFinite()) throw NumericError("initial guess contains NaN or Inf");

  const DirichletSet dir = collect_dirichlet(p.disc->mesh(), sp, p.bcs);
  const AssemblyOptions opts = detail::assembly_options(p, true);
  double floor = 0.0;
  if (cfg.abs_tol > 0.0) {
    const double scale =
        asmb.assemble(p.coeffs, Eigen::VectorXd::Zero(sp.n_total()), dir, opts).residual.lpNorm<Eigen::Infinity>();
    floor = cfg.abs_tol * scale;
  }

  LinearSolver lin(cfg.linear_policy, cfg.linear_tol);
  SolveDiagnostics diag;
  diag.threads = cfg.threads;
  double r0 = 0.0;
  for (int k = 0;; ++k) {
    AssembledSystem sys = asmb.assemble(p.coeffs, U, dir, opts);
    const double r = sys.residual.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(r)) throw NumericError("Newton iterate " + std::to_string(k) + " has a non-finite residual");
    if (k == 0) r0 = r;
    diag.residual_history.push_back(r);
    if (cfg.log) cfg.log("iter " + std::to_string(k) + " residual " + detail::format_residual(r0 > 0.0 ? r / r0 : 0.0));
    diag.newton_iterations = k;
    diag.initial_residual = r0;
    diag.final_residual_abs = r;
    diag.final_residual = r0 > 0.0 ? r / r0 : 0.0;
    double noise = 0.0;
    if (cfg.roundoff_factor > 0.0) {
      const SparseMatrix a = sys.jacobian.cwiseAbs();
      noise = cfg.roundoff_factor * std::numeric_limits<double>::epsilon() * (a * U.cwiseAbs()).lpNorm<Eigen::Infinity>();
    }
    diag.roundoff_floor = noise;
    if (r == 0.0 || r <= cfg.newton_tol * r0 || r <= floor || r <= noise) {
      diag.converged = true;
      break;
    }
    if (k == cfg.max_newton_iterations) break;
    sys = apply_dirichlet(std::move(sys));
    const Eigen::VectorXd d = lin.solve(sys.jacobian, sys.residual);
    U += d;
    if (!U.allFinite()) throw NumericError("Newton iterate " + std::to_string(k + 1) + " is not finite");
  }
  Solution s = detail::make_solution(p, U);
  s.diagnostics = diag;
  return s;
}

/// (m, n) stages leading to the target coefficients: geometric in max(m, n)
/// from `start` by `ratio`, ending exactly at the target. Mixed stages scale
/// both parameters together (m clamped to >= 1).
inline std::vector<std::pair<double, double>> default_ladder(const Coefficients& target, double start,
                                                             double ratio) {
  const double top = std::max(target.m, target.n);
  std::vector<std::pair<double, double>> out;
  if (target.scheme == Scheme::Real) return {{1.0, 0.0}};
  for (double level = start; level < top * (1.0 - 1e-12); level *= ratio) {
    const double s = level / top;
    double m = target.m, n = target.n;
    if (target.scheme == Scheme::Volume) n = level;
    if (target.scheme == Scheme::Viscosity) m = level;
    if (target.scheme == Scheme::Mixed) {
      m = std::max(1.0, target.m * s);
      n = target.n * s;
    }
    if (!out.empty() && std::max(m, n) <= std::max(out.back().first, out.back().second)) continue;
    out.emplace_back(m, n);
  }
  out.emplace_back(target.m, target.n);
  return out;
}

/// Solves a ladder of penalty stages, warm-starting each Newton solve from the
/// previous stage; the first stage starts from the Stokes solution. A
/// `warm_start` replaces the Stokes initial guess of the first stage.
inline Solution continuation_solve(const FlowProblem& p, const SolverConfig& cfg = {},
                                   const Solution* warm_start = nullptr) {
  detail::check_problem(p);
  cfg.validate();
  std::vector<std::pair<double, double>> ladder =
      cfg.ladder.empty() ? default_ladder(p.coeffs, cfg.continuation_start, cfg.continuation_ratio) : cfg.ladder;
  if (ladder.back() != std::pair<double, double>(p.coeffs.m, p.coeffs.n))
    throw ConfigError("continuation ladder must end at the target (m, n)");

  std::shared_ptr<const Solution> last;
  Solution current;
  std::vector<int> per_stage;
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    FlowProblem stage = p;
    stage.coeffs.m = ladder[i].first;
    stage.coeffs.n = ladder[i].second;
    std::ostringstream name;
    name.precision(3);
    name << "stage " << i + 1 << "/" << ladder.size() << " (m=" << stage.coeffs.m << ", n=" << stage.coeffs.n << ")";
    if (cfg.log) cfg.log(name.str());
    try {
      Solution init;
      if (i > 0) init = *last;
      else if (warm_start) init = *warm_start;
      else init = solve_stokes(stage, cfg);
      current = newton_solve(stage, init, cfg);
    } catch (const Error& e) {
      throw ContinuationError(name.str() + " failed: " + e.what(), static_cast<int>(i + 1), stage.coeffs.m,
                              stage.coeffs.n, last);
    }
    per_stage.push_back(current.diagnostics.newton_iterations);
    if (!current.diagnostics.converged) {
      throw ContinuationError(name.str() + " failed: Newton did not converge in " +
                                  std::to_string(cfg.max_newton_iterations) + " iterations (relative residual " +
                                  detail::format_residual(current.diagnostics.final_residual) + ")",
                              static_cast<int>(i + 1), stage.coeffs.m, stage.coeffs.n, last);
    }
    last = std::make_shared<const Solution>(current);
  }
  current.diagnostics.stages = static_cast<int>(ladder.size());
  current.diagnostics.stage_iterations = per_stage;
  return current;
}

/// Re-assembles F at the solution and checks ||F||_inf against the recorded
/// convergence criterion.
inline bool verify_certificate(const FlowProblem& p, const Solution& s, const SolverConfig& cfg = {}) {
  if (!s.diagnostics.converged || !s.finite()) return false;
  const double r = residual_norm(p, s.state());
  const double allowed = std::max({cfg.newton_tol * s.diagnostics.initial_residual,
                                   s.diagnostics.roundoff_floor, s.diagnostics.final_residual_abs * (1.0 + 1e-6)});
  return r <= allowed;
}

}  // namespace penalflow
