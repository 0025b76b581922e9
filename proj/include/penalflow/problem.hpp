#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "penalflow/errors.hpp"
#include "penalflow/geometry.hpp"

namespace penalflow {

/// Real: Navier-Stokes on the fluid mesh only. The penalized schemes solve on
/// the whole channel with an elevated friction (Volume), viscosity
/// (Viscosity) or both (Mixed) inside the obstacles.
enum class Scheme { Real, Volume, Viscosity, Mixed };

inline std::string_view scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Real: return "real";
    case Scheme::Volume: return "volume";
    case Scheme::Viscosity: return "viscosity";
    case Scheme::Mixed: return "mixed";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view name) {
  for (auto s : {Scheme::Real, Scheme::Volume, Scheme::Viscosity, Scheme::Mixed})
    if (scheme_name(s) == name) return s;
  throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

/// Piecewise-constant viscosity mu and friction eta.
///   mu  = nu on fluid, m*nu on obstacles (Viscosity, Mixed)
///   eta = 0 on fluid,  n    on obstacles (Volume, Mixed)
struct Coefficients {
  Scheme scheme = Scheme::Real;
  double nu = 1.0;
  double m = 1.0;
  double n = 0.0;

  static Coefficients real(double nu) { return {Scheme::Real, nu, 1.0, 0.0}; }
  static Coefficients volume(double nu, double n) { return {Scheme::Volume, nu, 1.0, n}; }
  static Coefficients viscosity(double nu, double m) { return {Scheme::Viscosity, nu, m, 0.0}; }
  static Coefficients mixed(double nu, double m, double n) { return {Scheme::Mixed, nu, m, n}; }

  void validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("viscosity nu must be positive");
    if (!(m >= 1.0) || !std::isfinite(m)) throw ConfigError("viscosity penalty m must be >= 1");
    if (!(n >= 0.0) || !std::isfinite(n)) throw ConfigError("volume penalty n must be >= 0");
    if (scheme == Scheme::Volume && m != 1.0) throw ConfigError("volume scheme requires m = 1");
    if (scheme == Scheme::Viscosity && n != 0.0) throw ConfigError("viscosity scheme requires n = 0");
    if (scheme == Scheme::Real && (m != 1.0 || n != 0.0))
      throw ConfigError("real scheme carries no penalty");
  }

  double mu(int region) const {
    const bool elevated = region != 0 && (scheme == Scheme::Viscosity || scheme == Scheme::Mixed);
    return elevated ? m * nu : nu;
  }
  double eta(int region) const {
    const bool elevated = region != 0 && (scheme == Scheme::Volume || scheme == Scheme::Mixed);
    return elevated ? n : 0.0;
  }
};

/// Parabolic inflow 4U/H^2 y (H - y).
inline double inflow_profile(double y, double peak, double height) {
  if (y < 0.0 || y > height)
    throw InvalidInput("inflow profile evaluated outside [0, H]: y = " + std::to_string(y));
  return 4.0 * peak / (height * height) * y * (height - y);
}

using VectorFunction = std::function<std::array<double, 2>(Point)>;

/// Velocity Dirichlet data: inflow profile on Inflow facets, no-slip on Wall
/// facets, do-nothing on Outflow. Interface facets are interior for the
/// penalized schemes and are only constrained on request.
struct BoundaryConditions {
  double inflow_peak = 100.0;
  double channel_height = 2.0;
  bool constrain_interface = false;
  /// When set, every boundary facet (outflow included) prescribes this velocity.
  VectorFunction full_dirichlet;
  /// Optional pressure gauge: (vertex index, value).
  std::optional<std::pair<int, double>> pressure_pin;
};

struct SolveDiagnostics {
  int newton_iterations = 0;
  double initial_residual = 0.0;     ///< ||F(U_0)||_inf
  double final_residual = 0.0;       ///< ||F(U_k)||_inf / ||F(U_0)||_inf
  double final_residual_abs = 0.0;   ///< ||F(U_k)||_inf
  double roundoff_floor = 0.0;       ///< accepted floating-point floor on ||F||_inf
  bool converged = false;
  int threads = 1;
  std::vector<double> residual_history;  ///< absolute inf-norms, one per iterate
  int stages = 1;
  std::vector<int> stage_iterations;  ///< Newton iterations per continuation stage
};

struct Solution {
  Eigen::VectorXd velocity;
  Eigen::VectorXd pressure;
  Scheme scheme = Scheme::Real;
  double m = 1.0;
  double n = 0.0;
  SolveDiagnostics diagnostics;

  Eigen::VectorXd state() const {
    Eigen::VectorXd s(velocity.size() + pressure.size());
    s << velocity, pressure;
    return s;
  }
  void set_state(const Eigen::VectorXd& s, Eigen::Index n_u) {
    velocity = s.head(n_u);
    pressure = s.tail(s.size() - n_u);
  }
  bool finite() const { return velocity.allFinite() && pressure.allFinite(); }
};

}  // namespace penalflow
