#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "penalflow/errors.hpp"
#include "penalflow/geometry.hpp"
#include "penalflow/mesh.hpp"
#include "penalflow/metrics.hpp"
#include "penalflow/problem.hpp"
#include "penalflow/solver.hpp"

namespace penalflow {

/// Decades 10^lo .. 10^hi.
inline std::vector<double> decades(int lo, int hi) {
  std::vector<double> v;
  for (int k = lo; k <= hi; ++k) v.push_back(std::pow(10.0, k));
  return v;
}

struct StudyConfig {
  CaseId case_id = CaseId::BoxWall;
  double h = 0.05;
  double nu = 1.0;
  double U = 100.0;
  double L = 4.0;
  double H = 2.0;
  int circle_segments = 64;
  std::vector<Scheme> schemes{Scheme::Volume, Scheme::Viscosity, Scheme::Mixed};
  std::vector<double> m_values = decades(1, 10);
  std::vector<double> n_values = decades(1, 10);
  /// Mixed sweeps use n = coupling * m.
  double coupling = 100.0;
  /// Contour axes; empty means the profile default.
  std::vector<double> contour_m;
  std::vector<double> contour_n;
  double window_lo = 1e6;
  double window_hi = 1e10;
  std::string profile = "full";  ///< "full" or "ci"
  int threads = 1;
  SolverConfig solver;

  void validate() const {
    if (!(h > 0.0)) throw ConfigError("h must be positive");
    if (!(nu > 0.0)) throw ConfigError("nu must be positive");
    if (!(U >= 0.0)) throw ConfigError("U must be >= 0");
    if (!(L > 0.0) || !(H > 0.0)) throw ConfigError("channel dimensions must be positive");
    if (schemes.empty()) throw ConfigError("scheme list is empty");
    for (Scheme s : schemes)
      if (s == Scheme::Real) throw ConfigError("'real' is the reference, not a sweep scheme");
    for (const auto* axis : {&m_values, &n_values, &contour_m, &contour_n})
      for (double v : *axis)
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("penalty values must be positive");
    for (double m : m_values)
      if (m < 1.0) throw ConfigError("viscosity penalty m must be >= 1");
    for (double m : contour_m)
      if (m < 1.0) throw ConfigError("viscosity penalty m must be >= 1");
    if (!(coupling > 0.0)) throw ConfigError("coupling constant must be positive");
    if (!(window_lo > 0.0) || !(window_hi > window_lo)) throw ConfigError("rate window must satisfy 0 < lo < hi");
    if (profile != "full" && profile != "ci") throw ConfigError("profile must be 'full' or 'ci'");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    solver.validate();
  }

  Geometry geometry() const {
    Geometry g = make_geometry(case_id, circle_segments);
    g.length = L;
    g.height = H;
    validate_geometry(g);
    return g;
  }

  BoundaryConditions boundary_conditions() const {
    BoundaryConditions b;
    b.inflow_peak = U;
    b.channel_height = H;
    return b;
  }

  /// Contour axes after profile defaults and the immersed-obstacle n floor.
  std::pair<std::vector<double>, std::vector<double>> contour_axes() const {
    std::vector<double> m = contour_m, n = contour_n;
    if (m.empty()) m = profile == "ci" ? std::vector<double>{1e4, 1e6, 1e8, 1e10} : decades(1, 10);
    if (n.empty()) {
      n = profile == "ci" ? std::vector<double>{1e4, 1e6, 1e8, 1e10} : decades(1, 10);
      if (case_id == CaseId::TwoObstacles) {
        std::erase_if(n, [](double v) { return v < 1e7 * (1 - 1e-12); });
        if (n.size() < 3) n = {1e7, 1e8, 1e9, 1e10};
      }
    }
    return {m, n};
  }
};

/// 64-bit FNV-1a, printed as 16 hex digits.
class Fingerprint {
 public:
  void add_bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add_bytes(&v, sizeof v); }
  void add(std::int64_t v) { add_bytes(&v, sizeof v); }
  void add(const std::string& s) {
    add(static_cast<std::int64_t>(s.size()));
    add_bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string mesh_fingerprint(const Mesh& mesh) {
  Fingerprint f;
  f.add(static_cast<std::int64_t>(mesh.vertices.size()));
  for (const auto& v : mesh.vertices) {
    f.add(v.x);
    f.add(v.y);
  }
  f.add(static_cast<std::int64_t>(mesh.triangles.size()));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    for (int v : mesh.triangles[t]) f.add(static_cast<std::int64_t>(v));
    f.add(static_cast<std::int64_t>(mesh.region[t]));
  }
  for (const auto& fc : mesh.facets) {
    f.add(static_cast<std::int64_t>(fc.v0));
    f.add(static_cast<std::int64_t>(fc.v1));
    f.add(static_cast<std::int64_t>(static_cast<int>(fc.tag)));
  }
  return f.hex();
}

inline std::string solution_fingerprint(const Solution& s) {
  Fingerprint f;
  for (Eigen::Index i = 0; i < s.velocity.size(); ++i) f.add(s.velocity[i]);
  for (Eigen::Index i = 0; i < s.pressure.size(); ++i) f.add(s.pressure[i]);
  return f.hex();
}

/// Canonical text of every input that influences results (thread count
/// included, since it is recorded alongside the numbers).
inline std::string config_echo(const StudyConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const auto list = [&](const char* key, const std::vector<double>& v) {
    os << key << " =";
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : " ") << v[i];
    os << "\n";
  };
  os << "case = " << case_name(c.case_id) << "\n";
  os << "h = " << c.h << "\nnu = " << c.nu << "\nU = " << c.U << "\nL = " << c.L << "\nH = " << c.H << "\n";
  os << "circle_segments = " << c.circle_segments << "\n";
  os << "schemes =";
  for (std::size_t i = 0; i < c.schemes.size(); ++i) os << (i ? ", " : " ") << scheme_name(c.schemes[i]);
  os << "\n";
  list("penalty.m", c.m_values);
  list("penalty.n", c.n_values);
  os << "coupling = n=" << c.coupling << "*m\n";
  const auto [cm, cn] = c.contour_axes();
  list("contour.m", cm);
  list("contour.n", cn);
  os << "window = " << c.window_lo << ":" << c.window_hi << "\n";
  os << "profile = " << c.profile << "\n";
  os << "threads = " << c.threads << "\n";
  os << "newton.tol = " << c.solver.newton_tol << "\n";
  os << "newton.tol_mode = relative\n";
  os << "newton.abs_tol = " << c.solver.abs_tol << "\n";
  os << "newton.roundoff_factor = " << c.solver.roundoff_factor << "\n";
  os << "newton.max_iter = " << c.solver.max_newton_iterations << "\n";
  os << "continuation.ratio = " << c.solver.continuation_ratio << "\n";
  os << "continuation.start = " << c.solver.continuation_start << "\n";
  os << "linear.solver = " << linear_policy_name(c.solver.linear_policy) << "\n";
  return os.str();
}

inline std::string config_fingerprint(const StudyConfig& c) {
  Fingerprint f;
  f.add(config_echo(c));
  return f.hex();
}

/// Mesh, fluid submesh and the real-obstacle reference shared by all
/// penalized solves of a study.
struct StudyContext {
  Geometry geometry;
  SubmeshMap submap;
  DiscretizationPtr global;
  DiscretizationPtr fluid;
  Solution reference;
  Eigen::VectorXd reference_global;  ///< reference velocity extended by zero
  std::string mesh_fingerprint;
  std::string reference_fingerprint;
  bool all_obstacles_touch_boundary = true;
  double reference_seconds = 0.0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs jobs 0..n-1 on up to `threads` workers. The first exception is
/// rethrown after all workers finish.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline SolverConfig job_solver_config(const StudyConfig& c, const std::string& label,
                                      const std::shared_ptr<std::mutex>& log_mutex) {
  SolverConfig s = c.solver;
  s.threads = c.threads;
  if (c.solver.log) {
    auto sink = c.solver.log;
    s.log = [sink, label, log_mutex](const std::string& line) {
      std::lock_guard lock(*log_mutex);
      sink(label + ": " + line);
    };
  }
  return s;
}

}  // namespace detail

/// Meshes the geometry and solves the real-obstacle reference on the fluid
/// submesh.
inline StudyContext prepare_study(const StudyConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  StudyContext ctx;
  ctx.geometry = config.geometry();
  Mesh mesh = generate_mesh(ctx.geometry, config.h);
  ctx.mesh_fingerprint = mesh_fingerprint(mesh);
  ctx.submap = extract_fluid_submesh(mesh);
  ctx.global = make_discretization(std::move(mesh));
  ctx.fluid = make_discretization(ctx.submap.fluid);
  for (const auto& ob : ctx.geometry.obstacles)
    if (!touches_channel_boundary(ctx.geometry, ob)) ctx.all_obstacles_touch_boundary = false;

  FlowProblem real{ctx.fluid, Coefficients::real(config.nu), config.boundary_conditions(), {}};
  auto log_mutex = std::make_shared<std::mutex>();
  const SolverConfig sc = detail::job_solver_config(config, "real", log_mutex);
  ctx.reference = continuation_solve(real, sc);
  if (!verify_certificate(real, ctx.reference, sc))
    throw SolverError("reference solution failed the residual certificate");
  ctx.reference_global =
      extend_by_zero(ctx.reference.velocity, ctx.fluid->spaces(), ctx.submap, ctx.global->spaces());
  ctx.reference_fingerprint = solution_fingerprint(ctx.reference);
  ctx.reference_seconds = detail::seconds_since(t0);
  return ctx;
}

/// One sweep or contour cell with its solve diagnostics.
struct StudyRecord {
  ErrorRecord error;
  bool certified = false;       ///< residual re-verified by reassembly
  int stages = 0;
  int max_stage_iterations = 0; ///< worst Newton count over continuation stages
  std::vector<double> norm_L2_obstacle;  ///< per obstacle, in geometry order
  std::string failure;          ///< empty when converged
  double seconds = 0.0;
  double final_residual = 0.0;  ///< relative to the first iterate of the last stage
  bool roundoff_stop = false;   ///< last stage stopped on the round-off floor
};

/// Active penalty of a sweep record: n for Volume, m otherwise.
inline double active_penalty(const ErrorRecord& r) { return r.scheme == Scheme::Volume ? r.n : r.m; }

struct SweepTable {
  std::vector<StudyRecord> records;
  std::string config_fingerprint;
  std::string mesh_fingerprint;
  std::string reference_fingerprint;
  bool all_obstacles_touch_boundary = true;
  double window_lo = 1e6;
  double window_hi = 1e10;
  /// scheme -> metric -> fit over the window (absent when the window has too
  /// few usable points).
  std::map<Scheme, std::map<std::string, RateFit>> rates;

  std::vector<const StudyRecord*> scheme_records(Scheme s) const {
    std::vector<const StudyRecord*> out;
    for (const auto& r : records)
      if (r.error.scheme == s) out.push_back(&r);
    return out;
  }
  /// (active penalty, metric) pairs of converged records of one scheme.
  std::vector<std::pair<double, double>> series(Scheme s, std::string_view metric) const {
    std::vector<std::pair<double, double>> out;
    for (const auto* r : scheme_records(s))
      if (r->error.converged) out.emplace_back(active_penalty(r->error), r->error.metric(metric));
    return out;
  }
};

namespace detail {

inline StudyRecord failed_record(Scheme s, double m, double n, const std::string& why) {
  StudyRecord r;
  r.error.scheme = s;
  r.error.m = m;
  r.error.n = n;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.error.err_L2_Omega = r.error.err_H1semi_Omega = r.error.err_L2_OmegaF = r.error.err_H1semi_OmegaF = nan;
  r.error.norm_L2_OmegaS = r.error.norm_H1semi_OmegaS = nan;
  r.error.converged = false;
  r.failure = why;
  return r;
}

/// Solves one penalized problem, warm-started from `warm` when given, and
/// evaluates it against the reference.
inline StudyRecord solve_point(const StudyContext& ctx, const StudyConfig& config, Coefficients coeffs,
                               const SolverConfig& sc, std::optional<Solution>& warm) {
  const auto t0 = std::chrono::steady_clock::now();
  FlowProblem p{ctx.global, coeffs, config.boundary_conditions(), {}};
  SolverConfig stage_cfg = sc;
  if (warm) {
    const double from = std::max(warm->m, warm->n);
    stage_cfg.ladder = default_ladder(coeffs, from * sc.continuation_ratio, sc.continuation_ratio);
  }
  try {
    Solution s = continuation_solve(p, stage_cfg, warm ? &*warm : nullptr);
    StudyRecord r;
    r.error = error_record(ctx.reference_global, s, ctx.global->spaces(), ctx.global->mesh());
    r.error.newton_iterations = 0;
    for (int it : s.diagnostics.stage_iterations) {
      r.error.newton_iterations += it;
      r.max_stage_iterations = std::max(r.max_stage_iterations, it);
    }
    r.stages = s.diagnostics.stages;
    r.certified = verify_certificate(p, s, stage_cfg);
    r.final_residual = s.diagnostics.final_residual;
    r.roundoff_stop = s.diagnostics.final_residual > stage_cfg.newton_tol &&
                      s.diagnostics.final_residual_abs <= s.diagnostics.roundoff_floor;
    for (const auto& ob : ctx.geometry.obstacles)
      r.norm_L2_obstacle.push_back(norm_l2(s.velocity, ctx.global->spaces(), ctx.global->mesh(),
                                           Region::obstacle(ob.region_id)));
    r.seconds = seconds_since(t0);
    warm = std::move(s);
    return r;
  } catch (const Error& e) {
    warm.reset();
    StudyRecord r = failed_record(coeffs.scheme, coeffs.m, coeffs.n, e.what());
    r.seconds = seconds_since(t0);
    return r;
  }
}

inline Coefficients sweep_coefficients(const StudyConfig& c, Scheme s, double p) {
  switch (s) {
    case Scheme::Volume: return Coefficients::volume(c.nu, p);
    case Scheme::Viscosity: return Coefficients::viscosity(c.nu, p);
    case Scheme::Mixed: return Coefficients::mixed(c.nu, p, c.coupling * p);
    case Scheme::Real: break;
  }
  throw ConfigError("real is not a penalized scheme");
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace detail

/// Per-scheme penalty sweep against the shared reference. Each scheme is one
/// warm-started chain over ascending penalties; chains run on the worker
/// pool and results are emitted in (scheme list, penalty) order.
inline SweepTable run_sweep(const StudyConfig& config, const StudyContext& ctx) {
  config.validate();
  SweepTable table;
  table.config_fingerprint = config_fingerprint(config);
  table.mesh_fingerprint = ctx.mesh_fingerprint;
  table.reference_fingerprint = ctx.reference_fingerprint;
  table.all_obstacles_touch_boundary = ctx.all_obstacles_touch_boundary;
  table.window_lo = config.window_lo;
  table.window_hi = config.window_hi;

  std::vector<std::vector<StudyRecord>> chains(config.schemes.size());
  auto log_mutex = std::make_shared<std::mutex>();
  detail::parallel_for(config.schemes.size(), config.threads, [&](std::size_t i) {
    const Scheme s = config.schemes[i];
    const auto grid = detail::sorted_unique(s == Scheme::Volume ? config.n_values : config.m_values);
    std::optional<Solution> warm;
    for (double p : grid) {
      const Coefficients c = detail::sweep_coefficients(config, s, p);
      std::ostringstream label;
      label << scheme_name(s) << " m=" << c.m << " n=" << c.n;
      const SolverConfig sc = detail::job_solver_config(config, label.str(), log_mutex);
      chains[i].push_back(detail::solve_point(ctx, config, c, sc, warm));
    }
  });
  std::size_t failures = 0;
  for (auto& chain : chains)
    for (auto& r : chain) {
      if (!r.error.converged) ++failures;
      table.records.push_back(std::move(r));
    }
  if (!table.records.empty() && failures == table.records.size())
    throw SolverError("every solve of the sweep failed; first failure: " + table.records.front().failure);

  for (Scheme s : config.schemes) {
    for (const char* metric : ErrorRecord::kMetricNames) {
      try {
        table.rates[s][metric] = fit_rate(table.series(s, metric), config.window_lo, config.window_hi);
      } catch (const InsufficientData&) {
      }
    }
  }
  return table;
}

inline SweepTable run_sweep(const StudyConfig& config) { return run_sweep(config, prepare_study(config)); }

/// Fit of log err = a + b log max(m, C n) over a contour grid.
struct MaxLawFit {
  std::string metric;
  double C = 1.0;
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int points_used = 0;
};

struct ContourGrid {
  std::vector<double> m_axis;
  std::vector<double> n_axis;
  std::vector<StudyRecord> cells;  ///< row-major: cells[i * n_axis.size() + j] is (m_i, n_j)
  std::string config_fingerprint;
  std::string mesh_fingerprint;
  std::string reference_fingerprint;

  const StudyRecord& at(std::size_t i, std::size_t j) const { return cells[i * n_axis.size() + j]; }
};

/// Least-squares line fit of y on x; returns (slope, intercept, sse, r2).
inline std::array<double, 4> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double intercept = my - slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - intercept - slope * x[i];
    sse += r * r;
  }
  const double r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return {slope, intercept, sse, r2};
}

/// Chooses C by minimizing the misfit over log10 C in [-6, 6]: a grid scan
/// at 0.01 followed by golden-section refinement around the best point.
inline MaxLawFit fit_max_law(const ContourGrid& grid, std::string_view metric) {
  std::vector<double> lm, ln, le;
  for (std::size_t i = 0; i < grid.m_axis.size(); ++i)
    for (std::size_t j = 0; j < grid.n_axis.size(); ++j) {
      const auto& r = grid.at(i, j).error;
      if (!r.converged) continue;
      const double e = r.metric(metric);
      if (!(e > 0.0)) continue;
      lm.push_back(std::log10(grid.m_axis[i]));
      ln.push_back(std::log10(grid.n_axis[j]));
      le.push_back(std::log10(e));
    }
  if (le.size() < 3) throw InsufficientData("max-law fit needs at least 3 converged cells");
  const auto eval = [&](double logc) {
    std::vector<double> x(le.size());
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::max(lm[k], logc + ln[k]);
    return linear_fit(x, le);
  };
  double best = -6.0, best_sse = eval(-6.0)[2];
  for (int k = -600; k <= 600; ++k) {
    const double c = k / 100.0;
    const double sse = eval(c)[2];
    if (sse < best_sse) {
      best_sse = sse;
      best = c;
    }
  }
  double a = std::max(-6.0, best - 0.01), b = std::min(6.0, best + 0.01);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 60; ++it) {
    const double c1 = b - g * (b - a), c2 = a + g * (b - a);
    if (eval(c1)[2] < eval(c2)[2]) b = c2;
    else a = c1;
  }
  const double mid = 0.5 * (a + b);
  if (eval(mid)[2] < best_sse) best = mid;
  const auto fit = eval(best);
  MaxLawFit out;
  out.metric = std::string(metric);
  out.C = std::pow(10.0, best);
  out.slope = fit[0];
  out.intercept = fit[1];
  out.r_squared = fit[3];
  out.points_used = static_cast<int>(le.size());
  return out;
}

/// True when the metric never increases along the given axis, allowing a
/// relative slack for solver-level noise in saturated rows.
inline bool contour_monotone(const ContourGrid& grid, std::string_view metric, bool along_m,
                             double rel_slack = 1e-6) {
  const std::size_t nm = grid.m_axis.size(), nn = grid.n_axis.size();
  for (std::size_t i = 0; i < nm; ++i)
    for (std::size_t j = 0; j < nn; ++j) {
      const std::size_t i2 = along_m ? i + 1 : i, j2 = along_m ? j : j + 1;
      if (i2 >= nm || j2 >= nn) continue;
      const auto& a = grid.at(i, j).error;
      const auto& b = grid.at(i2, j2).error;
      if (!a.converged || !b.converged) continue;
      if (b.metric(metric) > a.metric(metric) * (1.0 + rel_slack)) return false;
    }
  return true;
}

/// Mixed-scheme (m, n) grid. Each row of fixed m is one warm-started chain
/// over ascending n.
inline ContourGrid run_contour(const StudyConfig& config, const StudyContext& ctx) {
  config.validate();
  ContourGrid grid;
  auto [m_axis, n_axis] = config.contour_axes();
  grid.m_axis = detail::sorted_unique(m_axis);
  grid.n_axis = detail::sorted_unique(n_axis);
  if (grid.m_axis.size() < 3 || grid.n_axis.size() < 3)
    throw ConfigError("contour axes need at least 3 values each");
  grid.config_fingerprint = config_fingerprint(config);
  grid.mesh_fingerprint = ctx.mesh_fingerprint;
  grid.reference_fingerprint = ctx.reference_fingerprint;

  const std::size_t nn = grid.n_axis.size();
  grid.cells.resize(grid.m_axis.size() * nn);
  auto log_mutex = std::make_shared<std::mutex>();
  detail::parallel_for(grid.m_axis.size(), config.threads, [&](std::size_t i) {
    std::optional<Solution> warm;
    for (std::size_t j = 0; j < nn; ++j) {
      const Coefficients c = Coefficients::mixed(config.nu, grid.m_axis[i], grid.n_axis[j]);
      std::ostringstream label;
      label << "mixed m=" << c.m << " n=" << c.n;
      const SolverConfig sc = detail::job_solver_config(config, label.str(), log_mutex);
      grid.cells[i * nn + j] = detail::solve_point(ctx, config, c, sc, warm);
    }
  });
  return grid;
}

inline ContourGrid run_contour(const StudyConfig& config) { return run_contour(config, prepare_study(config)); }

struct BoundEntry {
  std::string id;
  std::string metric;
  double exponent = 0.0;        ///< theoretical decay exponent in the active penalty
  double measured_slope = 0.0;
  bool pass = false;
};

struct BoundReport {
  Scheme scheme = Scheme::Volume;
  std::vector<BoundEntry> entries;
  double empirical_reference_slope = -1.0;  ///< linear decay observed in the experiments
  double window_lo = 0.0;
  double window_hi = 0.0;
  bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const BoundEntry& e) { return e.pass; });
  }
};

/// Bounds that hold for a scheme, expressed as decay exponents in the active
/// penalty (Mixed assumes n proportional to m). The viscosity and mixed
/// bounds need every obstacle to touch the channel boundary.
inline std::vector<BoundEntry> applicable_bounds(Scheme scheme, bool all_touch) {
  const std::vector<BoundEntry> vol{{"vol:1.1", "norm_L2_OmegaS", 0.5},
                                    {"vol:3", "norm_L2_OmegaS", 0.75},
                                    {"vol:4", "err_H1semi_OmegaF", 0.25}};
  const std::vector<BoundEntry> visc{{"visc:1", "norm_H1semi_OmegaS", 0.5},
                                     {"visc:3", "norm_H1semi_OmegaS", 1.0},
                                     {"visc:4", "err_H1semi_OmegaF", 0.5}};
  const std::vector<BoundEntry> mix{{"mix:3", "norm_H1semi_OmegaS", 1.0},
                                    {"mix:4", "norm_L2_OmegaS", 1.0},
                                    {"mix:5", "err_H1semi_OmegaF", 0.5}};
  std::vector<BoundEntry> out;
  switch (scheme) {
    case Scheme::Volume: out = vol; break;
    case Scheme::Viscosity:
      if (all_touch) out = visc;
      break;
    case Scheme::Mixed:
      out = vol;
      if (all_touch) {
        out.insert(out.end(), visc.begin(), visc.end());
        out.insert(out.end(), mix.begin(), mix.end());
      }
      break;
    case Scheme::Real: break;
  }
  return out;
}

/// Compares measured slopes over the window with the theoretical exponents:
/// a bound passes when slope <= -exponent + slack.
inline BoundReport check_bounds(const SweepTable& table, Scheme scheme, double slack = 0.15) {
  BoundReport rep;
  rep.scheme = scheme;
  rep.window_lo = table.window_lo;
  rep.window_hi = table.window_hi;
  rep.entries = applicable_bounds(scheme, table.all_obstacles_touch_boundary);
  for (auto& e : rep.entries) {
    const RateFit fit = fit_rate(table.series(scheme, e.metric), table.window_lo, table.window_hi);
    e.measured_slope = fit.slope;
    e.pass = fit.slope <= -e.exponent + slack;
  }
  return rep;
}

struct MmsRow {
  double h = 0.0;
  int dofs = 0;
  double err_L2 = 0.0;
  double err_H1 = 0.0;
  int newton_iterations = 0;
};

struct MmsTable {
  std::vector<MmsRow> rows;
  double order_L2 = 0.0;
  double order_H1 = 0.0;
};

/// Manufactured pair on the channel, divergence free:
///   u = (sin(pi x) sin(pi y), cos(pi x) cos(pi y)),  p = cos(pi x) sin(pi y).
struct ManufacturedSolution {
  double nu = 1.0;
  bool linear = false;  ///< u = (x, -y), p = 0 instead

  std::array<double, 2> velocity(Point x) const {
    if (linear) return {x.x, -x.y};
    constexpr double pi = std::numbers::pi;
    return {std::sin(pi * x.x) * std::sin(pi * x.y), std::cos(pi * x.x) * std::cos(pi * x.y)};
  }
  std::array<std::array<double, 2>, 2> gradient(Point x) const {
    if (linear) return {{{1.0, 0.0}, {0.0, -1.0}}};
    constexpr double pi = std::numbers::pi;
    const double sx = std::sin(pi * x.x), cx = std::cos(pi * x.x), sy = std::sin(pi * x.y), cy = std::cos(pi * x.y);
    return {{{pi * cx * sy, pi * sx * cy}, {-pi * sx * cy, -pi * cx * sy}}};
  }
  double pressure(Point x) const {
    if (linear) return 0.0;
    constexpr double pi = std::numbers::pi;
    return std::cos(pi * x.x) * std::sin(pi * x.y);
  }
  /// f = -nu lap u + (u.grad)u + grad p
  std::array<double, 2> forcing(Point x) const {
    if (linear) return {x.x, x.y};
    constexpr double pi = std::numbers::pi;
    const double sx = std::sin(pi * x.x), cx = std::cos(pi * x.x), sy = std::sin(pi * x.y), cy = std::cos(pi * x.y);
    const auto u = velocity(x);
    return {2 * pi * pi * nu * u[0] + pi * sx * cx - pi * sx * sy,
            2 * pi * pi * nu * u[1] - pi * sy * cy + pi * cx * cy};
  }
};

/// Velocity errors of the Navier-Stokes solve with the manufactured forcing on
/// `levels` nested meshes: the channel meshed at `base_h`, then refined
/// uniformly. Orders are least-squares slopes of log error against log h.
inline MmsTable run_mms(int levels, double base_h = 0.4, double nu = 1.0, bool linear = false,
                        const SolverConfig& cfg = {}) {
  if (levels < 1) throw ConfigError("mms needs at least one level");
  if (!(base_h > 0.0)) throw ConfigError("mms base h must be positive");
  const ManufacturedSolution ms{nu, linear};
  MmsTable table;
  Mesh mesh = generate_mesh(make_geometry(CaseId::NoObstacle), base_h);
  for (int level = 0; level < levels; ++level) {
    if (level > 0) mesh = refine_uniform(mesh);
    FlowProblem p;
    p.disc = make_discretization(mesh);
    p.coeffs = Coefficients::real(nu);
    p.bcs.full_dirichlet = [ms](Point x) { return ms.velocity(x); };
    const Point x0 = mesh.vertices[0];
    p.bcs.pressure_pin = std::pair<int, double>(0, ms.pressure(x0));
    p.body_force = [ms](Point x) { return ms.forcing(x); };
    const Solution s = continuation_solve(p, cfg);
    if (!s.diagnostics.converged) throw SolverError("manufactured-solution solve did not converge");
    MmsRow row;
    row.h = mesh.h_target;
    row.dofs = p.disc->spaces().n_total();
    row.err_L2 = error_l2_exact(s.velocity, p.disc->spaces(), p.disc->mesh(),
                                [ms](Point x) { return ms.velocity(x); });
    row.err_H1 = error_h1_exact(s.velocity, p.disc->spaces(), p.disc->mesh(),
                                [ms](Point x) { return ms.gradient(x); });
    row.newton_iterations = s.diagnostics.newton_iterations;
    table.rows.push_back(row);
  }
  if (table.rows.size() >= 2 && !linear) {
    std::vector<double> lh, l2, h1;
    for (const auto& r : table.rows) {
      lh.push_back(std::log10(r.h));
      l2.push_back(std::log10(r.err_L2));
      h1.push_back(std::log10(r.err_H1));
    }
    table.order_L2 = linear_fit(lh, l2)[0];
    table.order_H1 = linear_fit(lh, h1)[0];
  }
  return table;
}

/// A single penalized (or real) solve on the study mesh.
struct SingleSolve {
  DiscretizationPtr disc;
  Solution solution;
  std::optional<ErrorRecord> error;  ///< against the reference, penalized schemes only
};

inline SingleSolve solve_single(const StudyConfig& config, Scheme scheme, double m, double n) {
  config.validate();
  SingleSolve out;
  if (scheme == Scheme::Real) {
    const Geometry g = config.geometry();
    const SubmeshMap sub = extract_fluid_submesh(generate_mesh(g, config.h));
    out.disc = make_discretization(sub.fluid);
    FlowProblem p{out.disc, Coefficients::real(config.nu), config.boundary_conditions(), {}};
    out.solution = continuation_solve(p, config.solver);
    return out;
  }
  const StudyContext ctx = prepare_study(config);
  Coefficients c{scheme, config.nu, m, n};
  c.validate();
  out.disc = ctx.global;
  FlowProblem p{ctx.global, c, config.boundary_conditions(), {}};
  out.solution = continuation_solve(p, config.solver);
  out.error = error_record(ctx.reference_global, out.solution, ctx.global->spaces(), ctx.global->mesh());
  return out;
}

}  // namespace penalflow
