#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "penalflow/basis.hpp"
#include "penalflow/errors.hpp"
#include "penalflow/mesh.hpp"
#include "penalflow/problem.hpp"
#include "penalflow/quadrature.hpp"
#include "penalflow/spaces.hpp"

namespace penalflow {

/// Triangle filter for integrals: the whole domain, the fluid, all obstacles,
/// or one obstacle by region id.
struct Region {
  enum class Kind { All, Fluid, Solid, Obstacle };
  Kind kind = Kind::All;
  int id = 0;

  static Region all() { return {Kind::All, 0}; }
  static Region fluid() { return {Kind::Fluid, 0}; }
  static Region solid() { return {Kind::Solid, 0}; }
  static Region obstacle(int id) { return {Kind::Obstacle, id}; }

  bool contains(int region) const {
    switch (kind) {
      case Kind::All: return true;
      case Kind::Fluid: return region == kFluidRegion;
      case Kind::Solid: return region != kFluidRegion;
      case Kind::Obstacle: return region == id;
    }
    return false;
  }
};

/// A norm value plus a flag set when no triangle matched the region.
struct RegionNorm {
  double value = 0.0;
  bool empty_region = false;
  operator double() const { return value; }
};

namespace detail {

struct ElementGeometry {
  double det;
  double a, b, c, d;
  Point x0;
  std::array<double, 2> phys_grad(const std::array<double, 2>& g) const {
    return {(d * g[0] - c * g[1]) / det, (-b * g[0] + a * g[1]) / det};
  }
  Point map(const std::array<double, 3>& l) const {
    return {x0.x + a * l[1] + b * l[2], x0.y + c * l[1] + d * l[2]};
  }
};

inline ElementGeometry element_geometry(const Mesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const Point x0 = mesh.vertices[static_cast<std::size_t>(tri[0])];
  const Point x1 = mesh.vertices[static_cast<std::size_t>(tri[1])];
  const Point x2 = mesh.vertices[static_cast<std::size_t>(tri[2])];
  ElementGeometry g{};
  g.a = x1.x - x0.x;
  g.b = x2.x - x0.x;
  g.c = x1.y - x0.y;
  g.d = x2.y - x0.y;
  g.det = g.a * g.d - g.b * g.c;
  g.x0 = x0;
  return g;
}

inline void check_field(const Eigen::VectorXd& field, const Spaces& spaces, const Mesh& mesh) {
  if (field.size() != spaces.n_u())
    throw InvalidInput("velocity field has " + std::to_string(field.size()) + " entries, expected " +
                       std::to_string(spaces.n_u()));
  if (spaces.p2_nodes.size() != mesh.triangles.size()) throw InvalidInput("spaces do not match the mesh");
}

/// Integrates a per-point density built from (u, grad u) of a P2 field.
template <class Density>
RegionNorm integrate(const Eigen::VectorXd& field, const Spaces& spaces, const Mesh& mesh, Region region,
                     int degree, Density density) {
  check_field(field, spaces, mesh);
  const QuadratureRule rule = quadrature_rule(degree);
  std::vector<BasisValues> basis;
  for (const auto& l : rule.points) basis.push_back(eval_basis(Family::P2, l));
  const int nn = spaces.n_nodes();
  double sum = 0.0;
  bool any = false;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (!region.contains(mesh.region[t])) continue;
    any = true;
    const ElementGeometry g = element_geometry(mesh, t);
    const auto& nodes = spaces.p2_nodes[t];
    double local = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      std::array<double, 2> u{0.0, 0.0};
      std::array<std::array<double, 2>, 2> du{};
      for (std::size_t i = 0; i < 6; ++i) {
        const auto gr = g.phys_grad(basis[q].ref_grad[i]);
        for (int c = 0; c < 2; ++c) {
          const double coef = field[c * nn + nodes[i]];
          u[static_cast<std::size_t>(c)] += coef * basis[q].value[i];
          du[static_cast<std::size_t>(c)][0] += coef * gr[0];
          du[static_cast<std::size_t>(c)][1] += coef * gr[1];
        }
      }
      local += rule.weights[q] * density(g.map(rule.points[q]), u, du);
    }
    sum += local * std::abs(g.det);
  }
  return {std::sqrt(std::max(sum, 0.0)), !any};
}

}  // namespace detail

/// L2 norm of a P2 velocity field over the region (degree-4 quadrature).
inline RegionNorm norm_l2(const Eigen::VectorXd& field, const Spaces& spaces, const Mesh& mesh,
                          Region region = Region::all()) {
  return detail::integrate(field, spaces, mesh, region, 4, [](Point, const auto& u, const auto&) {
    return u[0] * u[0] + u[1] * u[1];
  });
}

/// H1 seminorm of a P2 velocity field over the region.
inline RegionNorm seminorm_h1(const Eigen::VectorXd& field, const Spaces& spaces, const Mesh& mesh,
                              Region region = Region::all()) {
  return detail::integrate(field, spaces, mesh, region, 2, [](Point, const auto&, const auto& du) {
    return du[0][0] * du[0][0] + du[0][1] * du[0][1] + du[1][0] * du[1][0] + du[1][1] * du[1][1];
  });
}

using GradientFunction = std::function<std::array<std::array<double, 2>, 2>(Point)>;

/// ||u_h - u||_L2 against an analytic field (degree-6 quadrature).
inline double error_l2_exact(const Eigen::VectorXd& field, const Spaces& spaces, const Mesh& mesh,
                             const VectorFunction& exact) {
  return detail::integrate(field, spaces, mesh, Region::all(), 6, [&](Point x, const auto& u, const auto&) {
    const auto e = exact(x);
    return (u[0] - e[0]) * (u[0] - e[0]) + (u[1] - e[1]) * (u[1] - e[1]);
  });
}

/// |u_h - u|_H1 against an analytic gradient, grad[c][d] = d u_c / d x_d.
inline double error_h1_exact(const Eigen::VectorXd& field, const Spaces& spaces, const Mesh& mesh,
                             const GradientFunction& exact_grad) {
  return detail::integrate(field, spaces, mesh, Region::all(), 6, [&](Point x, const auto&, const auto& du) {
    const auto e = exact_grad(x);
    double s = 0.0;
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t d = 0; d < 2; ++d) s += (du[c][d] - e[c][d]) * (du[c][d] - e[c][d]);
    return s;
  });
}

/// Nodal P2 interpolant of an analytic velocity field.
inline Eigen::VectorXd interpolate(const Spaces& spaces, const VectorFunction& f) {
  Eigen::VectorXd out(spaces.n_u());
  for (int i = 0; i < spaces.n_nodes(); ++i) {
    const auto v = f(spaces.node_coords[static_cast<std::size_t>(i)]);
    out[spaces.velocity_dof(i, 0)] = v[0];
    out[spaces.velocity_dof(i, 1)] = v[1];
  }
  return out;
}

/// Prolongs a fluid-submesh velocity to the parent mesh by zero.
inline Eigen::VectorXd extend_by_zero(const Eigen::VectorXd& sub_velocity, const Spaces& sub_spaces,
                                      const SubmeshMap& submap, const Spaces& global) {
  if (sub_velocity.size() != sub_spaces.n_u())
    throw InvalidInput("submesh velocity does not match the submesh spaces");
  if (submap.vertex_map.size() != static_cast<std::size_t>(sub_spaces.n_vertices))
    throw InvalidInput("submesh map does not match the submesh spaces");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(global.n_u());
  std::vector<int> node_map(static_cast<std::size_t>(sub_spaces.n_nodes()));
  for (int v = 0; v < sub_spaces.n_vertices; ++v) {
    const int gv = submap.vertex_map[static_cast<std::size_t>(v)];
    if (gv < 0 || gv >= global.n_vertices) throw InvalidInput("submesh vertex maps outside the parent mesh");
    node_map[static_cast<std::size_t>(v)] = gv;
  }
  for (std::size_t e = 0; e < sub_spaces.edges.size(); ++e) {
    const auto [a, b] = sub_spaces.edges[e];
    node_map[static_cast<std::size_t>(sub_spaces.n_vertices) + e] =
        global.edge_node(submap.vertex_map[static_cast<std::size_t>(a)], submap.vertex_map[static_cast<std::size_t>(b)]);
  }
  for (int i = 0; i < sub_spaces.n_nodes(); ++i) {
    const int g = node_map[static_cast<std::size_t>(i)];
    out[global.velocity_dof(g, 0)] = sub_velocity[sub_spaces.velocity_dof(i, 0)];
    out[global.velocity_dof(g, 1)] = sub_velocity[sub_spaces.velocity_dof(i, 1)];
  }
  return out;
}

struct ErrorRecord {
  Scheme scheme = Scheme::Real;
  double m = 1.0;
  double n = 0.0;
  double err_L2_Omega = 0.0;
  double err_H1semi_Omega = 0.0;
  double err_L2_OmegaF = 0.0;
  double err_H1semi_OmegaF = 0.0;
  double norm_L2_OmegaS = 0.0;
  double norm_H1semi_OmegaS = 0.0;
  int newton_iterations = 0;
  bool converged = true;

  static constexpr std::array<const char*, 6> kMetricNames{
      "err_L2_Omega", "err_H1semi_Omega", "err_L2_OmegaF", "err_H1semi_OmegaF", "norm_L2_OmegaS", "norm_H1semi_OmegaS"};

  /// Metric by column name; throws InvalidInput for unknown names.
  double metric(std::string_view name) const {
    if (name == "err_L2_Omega") return err_L2_Omega;
    if (name == "err_H1semi_Omega") return err_H1semi_Omega;
    if (name == "err_L2_OmegaF") return err_L2_OmegaF;
    if (name == "err_H1semi_OmegaF") return err_H1semi_OmegaF;
    if (name == "norm_L2_OmegaS") return norm_L2_OmegaS;
    if (name == "norm_H1semi_OmegaS") return norm_H1semi_OmegaS;
    throw InvalidInput("unknown metric '" + std::string(name) + "'");
  }
};

/// All six metrics of `approx` against the zero-extended reference velocity.
inline ErrorRecord error_record(const Eigen::VectorXd& reference, const Solution& approx, const Spaces& spaces,
                                const Mesh& mesh) {
  if (reference.size() != spaces.n_u() || approx.velocity.size() != spaces.n_u())
    throw InvalidInput("reference and approximation must live on the same velocity space");
  const Eigen::VectorXd diff = approx.velocity - reference;
  ErrorRecord r;
  r.scheme = approx.scheme;
  r.m = approx.m;
  r.n = approx.n;
  r.err_L2_Omega = norm_l2(diff, spaces, mesh);
  r.err_H1semi_Omega = seminorm_h1(diff, spaces, mesh);
  r.err_L2_OmegaF = norm_l2(diff, spaces, mesh, Region::fluid());
  r.err_H1semi_OmegaF = seminorm_h1(diff, spaces, mesh, Region::fluid());
  r.norm_L2_OmegaS = norm_l2(approx.velocity, spaces, mesh, Region::solid());
  r.norm_H1semi_OmegaS = seminorm_h1(approx.velocity, spaces, mesh, Region::solid());
  r.newton_iterations = approx.diagnostics.newton_iterations;
  r.converged = approx.diagnostics.converged;
  return r;
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double residual = 0.0;  ///< root-mean-square misfit in log10 units
  int points_used = 0;
  int zeros_excluded = 0;
};

/// Least-squares line through (log10 parameter, log10 error) for points
/// inside [lo, hi]. Zero errors are dropped and counted.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points,
                        double lo = 0.0, double hi = std::numeric_limits<double>::infinity()) {
  RateFit fit;
  fit.window_lo = lo;
  fit.window_hi = hi;
  std::vector<double> xs, ys;
  const double slack = 1e-9;
  for (const auto& [p, e] : points) {
    if (!(p > 0.0) || p < lo * (1 - slack) || p > hi * (1 + slack)) continue;
    if (!std::isfinite(e) || e < 0.0) continue;
    if (e == 0.0) {
      ++fit.zeros_excluded;
      continue;
    }
    xs.push_back(std::log10(p));
    ys.push_back(std::log10(e));
  }
  fit.points_used = static_cast<int>(xs.size());
  if (xs.size() < 3)
    throw InsufficientData("rate fit needs at least 3 usable points in the window, got " +
                           std::to_string(xs.size()));
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw InsufficientData("rate fit needs at least two distinct parameter values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

}  // namespace penalflow
