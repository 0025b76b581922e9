#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "penalflow/basis.hpp"
#include "penalflow/errors.hpp"
#include "penalflow/mesh.hpp"
#include "penalflow/problem.hpp"
#include "penalflow/quadrature.hpp"
#include "penalflow/spaces.hpp"

namespace penalflow {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Sorted (dof, value) list of Dirichlet constraints.
class DirichletSet {
 public:
  /// Adds a constraint; a second, different value for the same dof is a conflict.
  void add(int dof, double value) {
    auto [it, inserted] = values_.emplace(dof, value);
    if (!inserted && std::abs(it->second - value) > 1e-12 * (1.0 + std::abs(value))) {
      std::ostringstream os;
      os.precision(17);
      os << "dof " << dof << " constrained to both " << it->second << " and " << value;
      throw ConstraintConflict(os.str());
    }
  }
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  bool contains(int dof) const { return values_.contains(dof); }
  const std::map<int, double>& values() const { return values_; }

 private:
  std::map<int, double> values_;
};

/// Dirichlet set of the boundary conditions on the given mesh.
inline DirichletSet collect_dirichlet(const Mesh& mesh, const Spaces& spaces,
                                      const BoundaryConditions& bcs) {
  DirichletSet set;
  const auto constrain_node = [&](int node, std::array<double, 2> value) {
    set.add(spaces.velocity_dof(node, 0), value[0]);
    set.add(spaces.velocity_dof(node, 1), value[1]);
  };
  for (const auto& f : mesh.facets) {
    const int mid = spaces.edge_node(f.v0, f.v1);
    for (int node : {f.v0, f.v1, mid}) {
      const Point x = spaces.node_coords[static_cast<std::size_t>(node)];
      if (bcs.full_dirichlet) {
        if (f.tag == FacetTag::Interface && !bcs.constrain_interface) continue;
        constrain_node(node, bcs.full_dirichlet(x));
        continue;
      }
      switch (f.tag) {
        case FacetTag::Inflow:
          constrain_node(node, {inflow_profile(x.y, bcs.inflow_peak, bcs.channel_height), 0.0});
          break;
        case FacetTag::Wall:
          constrain_node(node, {0.0, 0.0});
          break;
        case FacetTag::Interface:
          if (bcs.constrain_interface) constrain_node(node, {0.0, 0.0});
          break;
        case FacetTag::Outflow:
          break;
      }
    }
  }
  if (bcs.pressure_pin) {
    const auto [vertex, value] = *bcs.pressure_pin;
    if (vertex < 0 || vertex >= spaces.n_p()) throw InvalidInput("pressure pin vertex out of range");
    set.add(spaces.pressure_dof(vertex), value);
  }
  return set;
}

/// Newton system F(U), J(U) in saddle-point layout [[A, B^T], [B, 0]].
/// Before elimination, constrained rows hold U_i - g_i and identity rows.
struct AssembledSystem {
  Eigen::VectorXd residual;
  SparseMatrix jacobian;
  DirichletSet constraints;
  bool eliminated = false;
};

struct AssemblyOptions {
  bool convection = true;
  /// Body force f in the momentum equation; empty means f = 0.
  VectorFunction body_force;
  int quadrature_degree = 5;
};

/// Element-by-element assembly of the Taylor-Hood Navier-Stokes residual and
/// its exact Jacobian. The sparsity pattern and the element-to-storage map are
/// computed once per mesh; each assembly then only overwrites values.
///
/// The Assembler keeps references to the mesh and spaces; both must outlive it.
class Assembler {
 public:
  static constexpr int kLocal = 15;

  Assembler(const Mesh& mesh, const Spaces& spaces) : mesh_(&mesh), spaces_(&spaces) {
    if (static_cast<std::size_t>(spaces.p2_nodes.size()) != mesh.triangles.size())
      throw InvalidInput("spaces do not match the mesh");
    const int n = spaces.n_total();
    std::vector<Eigen::Triplet<double, int>> trip;
    trip.reserve(mesh.triangles.size() * (12 * 12 + 2 * 12 * 3 + 3));
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto d = spaces.element_dofs(t, mesh);
      for (int a = 0; a < kLocal; ++a)
        for (int b = 0; b < kLocal; ++b)
          if (a < 12 || b < 12 || a == b) trip.emplace_back(d[static_cast<std::size_t>(a)], d[static_cast<std::size_t>(b)], 0.0);
    }
    pattern_.resize(n, n);
    pattern_.setFromTriplets(trip.begin(), trip.end());
    pattern_.makeCompressed();

    slots_.assign(mesh.triangles.size() * kLocal * kLocal, -1);
    const int* outer = pattern_.outerIndexPtr();
    const int* inner = pattern_.innerIndexPtr();
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto d = spaces.element_dofs(t, mesh);
      for (int a = 0; a < kLocal; ++a)
        for (int b = 0; b < kLocal; ++b) {
          if (!(a < 12 || b < 12 || a == b)) continue;
          const int row = d[static_cast<std::size_t>(a)], col = d[static_cast<std::size_t>(b)];
          const int* lo = inner + outer[col];
          const int* hi = inner + outer[col + 1];
          const int* it = std::lower_bound(lo, hi, row);
          slots_[(t * kLocal + static_cast<std::size_t>(a)) * kLocal + static_cast<std::size_t>(b)] =
              static_cast<int>(it - inner);
        }
    }
  }

  const Mesh& mesh() const { return *mesh_; }
  const Spaces& spaces() const { return *spaces_; }
  const SparseMatrix& pattern() const { return pattern_; }

  AssembledSystem assemble(const Coefficients& coeffs, const Eigen::VectorXd& state,
                           const DirichletSet& constraints,
                           const AssemblyOptions& opts = {}) const {
    coeffs.validate();
    const Spaces& sp = *spaces_;
    const Mesh& mesh = *mesh_;
    if (state.size() != sp.n_total())
      throw InvalidInput("state has " + std::to_string(state.size()) + " entries, expected " +
                         std::to_string(sp.n_total()));
    if (!state.allFinite()) throw NumericError("state contains NaN or Inf");

    AssembledSystem sys;
    sys.residual = Eigen::VectorXd::Zero(sp.n_total());
    sys.jacobian = pattern_;
    std::fill_n(sys.jacobian.valuePtr(), sys.jacobian.nonZeros(), 0.0);
    sys.constraints = constraints;
    double* values = sys.jacobian.valuePtr();

    const QuadratureRule rule = quadrature_rule(opts.quadrature_degree);
    const std::size_t nq = rule.size();
    std::vector<BasisValues> p2(nq), p1(nq);
    for (std::size_t q = 0; q < nq; ++q) {
      p2[q] = eval_basis(Family::P2, rule.points[q]);
      p1[q] = eval_basis(Family::P1, rule.points[q]);
    }

    std::array<double, kLocal> res{};
    std::array<double, kLocal * kLocal> jac{};
    std::array<std::array<double, 2>, 6> grad{};
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
      const auto& tri = mesh.triangles[t];
      const Point x0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
      const Point x1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
      const Point x2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
      const double a = x1.x - x0.x, b = x2.x - x0.x, c = x1.y - x0.y, d = x2.y - x0.y;
      const double det = a * d - b * c;
      const double mu = coeffs.mu(mesh.region[t]);
      const double eta = coeffs.eta(mesh.region[t]);
      const auto dofs = sp.element_dofs(t, mesh);

      std::array<double, kLocal> U{};
      for (int i = 0; i < kLocal; ++i) U[static_cast<std::size_t>(i)] = state[dofs[static_cast<std::size_t>(i)]];

      res.fill(0.0);
      jac.fill(0.0);
      for (std::size_t q = 0; q < nq; ++q) {
        const double w = rule.weights[q] * std::abs(det);
        const auto& phi = p2[q].value;
        const auto& psi = p1[q].value;
        for (std::size_t i = 0; i < 6; ++i) {
          const auto& g = p2[q].ref_grad[i];
          grad[i] = {(d * g[0] - c * g[1]) / det, (-b * g[0] + a * g[1]) / det};
        }
        double u[2] = {0.0, 0.0};
        double du[2][2] = {{0.0, 0.0}, {0.0, 0.0}};  // du[comp][dir]
        for (std::size_t i = 0; i < 6; ++i) {
          for (std::size_t comp = 0; comp < 2; ++comp) {
            const double coef = U[comp * 6 + i];
            u[comp] += coef * phi[i];
            du[comp][0] += coef * grad[i][0];
            du[comp][1] += coef * grad[i][1];
          }
        }
        double p = 0.0;
        for (std::size_t k = 0; k < 3; ++k) p += U[12 + k] * psi[k];
        const double div = du[0][0] + du[1][1];
        double f[2] = {0.0, 0.0};
        if (opts.body_force) {
          const Point xq{rule.points[q][0] * x0.x + rule.points[q][1] * x1.x + rule.points[q][2] * x2.x,
                         rule.points[q][0] * x0.y + rule.points[q][1] * x1.y + rule.points[q][2] * x2.y};
          const auto fv = opts.body_force(xq);
          f[0] = fv[0];
          f[1] = fv[1];
        }
        double conv[2] = {0.0, 0.0};
        if (opts.convection) {
          conv[0] = u[0] * du[0][0] + u[1] * du[0][1];
          conv[1] = u[0] * du[1][0] + u[1] * du[1][1];
        }

        for (std::size_t i = 0; i < 6; ++i) {
          for (std::size_t comp = 0; comp < 2; ++comp) {
            res[comp * 6 + i] += w * (mu * (du[comp][0] * grad[i][0] + du[comp][1] * grad[i][1]) +
                                      (conv[comp] + eta * u[comp] - f[comp]) * phi[i] -
                                      p * grad[i][comp]);
          }
        }
        for (std::size_t k = 0; k < 3; ++k) res[12 + k] -= w * psi[k] * div;

        for (std::size_t i = 0; i < 6; ++i) {
          for (std::size_t j = 0; j < 6; ++j) {
            const double lap = grad[j][0] * grad[i][0] + grad[j][1] * grad[i][1];
            double diag = mu * lap + eta * phi[j] * phi[i];
            if (opts.convection) diag += (u[0] * grad[j][0] + u[1] * grad[j][1]) * phi[i];
            for (std::size_t ci = 0; ci < 2; ++ci) {
              for (std::size_t cj = 0; cj < 2; ++cj) {
                double v = (ci == cj) ? diag : 0.0;
                if (opts.convection) v += phi[j] * du[ci][cj] * phi[i];
                jac[(ci * 6 + i) * kLocal + cj * 6 + j] += w * v;
              }
            }
          }
          for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t comp = 0; comp < 2; ++comp) {
              const double v = -w * psi[k] * grad[i][comp];
              jac[(comp * 6 + i) * kLocal + 12 + k] += v;
              jac[(12 + k) * kLocal + comp * 6 + i] += v;
            }
          }
        }
      }

      const int* slot = &slots_[t * kLocal * kLocal];
      for (std::size_t r = 0; r < kLocal; ++r) {
        sys.residual[dofs[r]] += res[r];
        for (std::size_t s = 0; s < kLocal; ++s) {
          const int k = slot[r * kLocal + s];
          if (k >= 0) values[k] += jac[r * kLocal + s];
        }
      }
    }

    // Constrained rows: F_i = U_i - g_i with identity Jacobian rows.
    if (!constraints.empty()) {
      std::vector<char> fixed(static_cast<std::size_t>(sp.n_total()), 0);
      for (const auto& [dof, g] : constraints.values()) {
        if (dof < 0 || dof >= sp.n_total()) throw InvalidInput("constraint dof out of range");
        fixed[static_cast<std::size_t>(dof)] = 1;
        sys.residual[dof] = state[dof] - g;
      }
      for (int col = 0; col < sys.jacobian.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(sys.jacobian, col); it; ++it)
          if (fixed[static_cast<std::size_t>(it.row())]) it.valueRef() = (it.row() == col) ? 1.0 : 0.0;
    }
    return sys;
  }

 private:
  const Mesh* mesh_;
  const Spaces* spaces_;
  SparseMatrix pattern_;
  std::vector<int> slots_;
};

/// Assembles the residual and Newton Jacobian of the Taylor-Hood weak form
///   (u.grad u, v) + (mu grad u, grad v) + (eta u, v) - (p, div v) - (q, div u) = (f, v)
/// at `state` with the Dirichlet rows of `bcs` replaced by U_i - g_i.
inline AssembledSystem assemble_system(const Mesh& mesh, const Spaces& spaces,
                                       const Coefficients& coeffs, const Eigen::VectorXd& state,
                                       const BoundaryConditions& bcs,
                                       const AssemblyOptions& opts = {}) {
  Assembler assembler(mesh, spaces);
  return assembler.assemble(coeffs, state, collect_dirichlet(mesh, spaces, bcs), opts);
}

/// Symmetric elimination of the constrained dofs: constrained rows and columns
/// become identity, and the column contributions of the known Newton update
/// dU_i = -(U_i - g_i) move into the residual. Solving J dU = -F on the result
/// gives the constrained Newton step.
inline AssembledSystem apply_dirichlet(AssembledSystem system) {
  if (system.constraints.empty() || system.eliminated) {
    system.eliminated = true;
    return system;
  }
  const auto n = static_cast<std::size_t>(system.residual.size());
  std::vector<char> fixed(n, 0);
  for (const auto& [dof, g] : system.constraints.values()) fixed[static_cast<std::size_t>(dof)] = 1;
  const Eigen::VectorXd original = system.residual;
  for (int col = 0; col < system.jacobian.outerSize(); ++col) {
    const bool col_fixed = fixed[static_cast<std::size_t>(col)] != 0;
    const double known_step = col_fixed ? -original[col] : 0.0;
    for (SparseMatrix::InnerIterator it(system.jacobian, col); it; ++it) {
      const bool row_fixed = fixed[static_cast<std::size_t>(it.row())] != 0;
      if (row_fixed) {
        it.valueRef() = (it.row() == col) ? 1.0 : 0.0;
      } else if (col_fixed) {
        system.residual[it.row()] += it.value() * known_step;
        it.valueRef() = 0.0;
      }
    }
  }
  system.eliminated = true;
  return system;
}

}  // namespace penalflow
