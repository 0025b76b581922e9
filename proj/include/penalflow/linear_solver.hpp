#pragma once

#include <algorithm>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <Eigen/UmfPackSupport>

#include "penalflow/assembly.hpp"
#include "penalflow/errors.hpp"

namespace penalflow {

enum class LinearPolicy { Direct, Iterative };

inline std::string_view linear_policy_name(LinearPolicy p) {
  return p == LinearPolicy::Direct ? "direct" : "iterative";
}

inline LinearPolicy parse_linear_policy(std::string_view s) {
  if (s == "direct") return LinearPolicy::Direct;
  if (s == "iterative") return LinearPolicy::Iterative;
  throw ConfigError("unknown linear solver '" + std::string(s) + "' (expected direct or iterative)");
}

struct LinearSolveReport {
  double relative_residual = 0.0;  ///< ||J d + F||_2 / ||F||_2
  int refinement_steps = 0;
  int iterations = 0;              ///< Krylov iterations (iterative policy)
};

/// Solves J d = -F. The direct policy factors with UMFPACK and applies
/// iterative refinement until the relative residual reaches `tolerance`; the
/// symbolic analysis is reused while the sparsity pattern stays the same.
class LinearSolver {
 public:
  explicit LinearSolver(LinearPolicy policy = LinearPolicy::Direct, double tolerance = 1e-12,
                        int max_refinement = 4)
      : policy_(policy), tolerance_(tolerance), max_refinement_(max_refinement) {}

  LinearPolicy policy() const { return policy_; }
  double tolerance() const { return tolerance_; }

  Eigen::VectorXd solve(const SparseMatrix& J, const Eigen::VectorXd& F,
                        LinearSolveReport* report = nullptr) {
    if (J.rows() != J.cols() || J.rows() != F.size())
      throw InvalidInput("linear system dimensions do not match");
    LinearSolveReport rep;
    const double fnorm = F.norm();
    if (fnorm == 0.0) {
      if (report) *report = rep;
      return Eigen::VectorXd::Zero(F.size());
    }
    Eigen::VectorXd d = policy_ == LinearPolicy::Direct ? solve_direct(J, F, rep) : solve_iterative(J, F, rep);
    if (!d.allFinite()) throw LinearSolverError("linear solve produced non-finite values");
    if (report) *report = rep;
    return d;
  }

 private:
  Eigen::VectorXd solve_direct(const SparseMatrix& J, const Eigen::VectorXd& F, LinearSolveReport& rep) {
    const bool same_pattern = lu_ && J.rows() == rows_ && J.nonZeros() == nnz_;
    if (!same_pattern) {
      lu_ = std::make_unique<Eigen::UmfPackLU<SparseMatrix>>();
      lu_->analyzePattern(J);
      rows_ = J.rows();
      nnz_ = J.nonZeros();
    }
    lu_->factorize(J);
    if (lu_->info() != Eigen::Success) {
      std::ostringstream os;
      os << "sparse LU factorization failed (n=" << J.rows() << ", nnz=" << J.nonZeros()
         << "): matrix is numerically singular";
      throw LinearSolverError(os.str());
    }
    const double fnorm = F.norm();
    Eigen::VectorXd d = lu_->solve(Eigen::VectorXd(-F));
    Eigen::VectorXd r = J * d + F;
    rep.relative_residual = r.norm() / fnorm;
    while (rep.relative_residual > tolerance_ && rep.refinement_steps < max_refinement_) {
      const Eigen::VectorXd c = lu_->solve(Eigen::VectorXd(-r));
      const Eigen::VectorXd trial = d + c;
      const Eigen::VectorXd rt = J * trial + F;
      ++rep.refinement_steps;
      const double rel = rt.norm() / fnorm;
      if (!(rel < rep.relative_residual)) break;
      d = trial;
      r = rt;
      rep.relative_residual = rel;
    }
    return d;
  }

  Eigen::VectorXd solve_iterative(const SparseMatrix& J, const Eigen::VectorXd& F, LinearSolveReport& rep) {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> solver;
    solver.preconditioner().setDroptol(1e-6);
    solver.preconditioner().setFillfactor(20);
    solver.setTolerance(tolerance_);
    solver.setMaxIterations(static_cast<int>(std::max<Eigen::Index>(1000, 2 * J.rows())));
    solver.compute(J);
    if (solver.info() != Eigen::Success) throw LinearSolverError("incomplete LU preconditioner failed");
    Eigen::VectorXd d = solver.solve(Eigen::VectorXd(-F));
    rep.iterations = static_cast<int>(solver.iterations());
    rep.relative_residual = (J * d + F).norm() / F.norm();
    if (solver.info() != Eigen::Success && rep.relative_residual > tolerance_) {
      std::ostringstream os;
      os << "BiCGSTAB did not converge after " << solver.iterations()
         << " iterations (relative residual " << rep.relative_residual << ")";
      throw LinearSolverError(os.str());
    }
    return d;
  }

  LinearPolicy policy_;
  double tolerance_;
  int max_refinement_;
  std::unique_ptr<Eigen::UmfPackLU<SparseMatrix>> lu_;
  Eigen::Index rows_ = 0;
  Eigen::Index nnz_ = 0;
};

/// One-shot solve of a constrained system: returns d with J d = -F.
inline Eigen::VectorXd solve_linear(const AssembledSystem& system, LinearPolicy policy = LinearPolicy::Direct,
                                    LinearSolveReport* report = nullptr) {
  const AssembledSystem& s = system;
  if (!s.eliminated && !s.constraints.empty()) {
    const AssembledSystem e = apply_dirichlet(s);
    LinearSolver solver(policy);
    return solver.solve(e.jacobian, e.residual, report);
  }
  LinearSolver solver(policy);
  return solver.solve(s.jacobian, s.residual, report);
}

}  // namespace penalflow
