#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "penalflow/penalflow.hpp"

namespace pf = penalflow;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

pf::StudyConfig load(const std::string& path, bool verbose) {
  pf::StudyConfig c = pf::load_config(path);
  pf::apply_environment(c);
  if (verbose) c.solver.log = [](const std::string& line) { std::cerr << line << "\n"; };
  return c;
}

std::pair<double, double> parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw pf::ConfigError("window must be 'lo:hi'");
  const double lo = pf::parse_number(text.substr(0, colon));
  const double hi = pf::parse_number(text.substr(colon + 1));
  if (!(lo > 0.0) || !(hi > lo)) throw pf::ConfigError("window must satisfy 0 < lo < hi");
  return {lo, hi};
}

void print_bounds(const pf::BoundReport& rep) {
  std::printf("bounds %s (window %.0e:%.0e, empirical slope %.1f)\n", std::string(pf::scheme_name(rep.scheme)).c_str(),
              rep.window_lo, rep.window_hi, rep.empirical_reference_slope);
  if (rep.entries.empty()) std::printf("  no applicable bounds\n");
  for (const auto& e : rep.entries)
    std::printf("  %-8s %-20s exponent %.2f  slope %+.3f  %s\n", e.id.c_str(), e.metric.c_str(), e.exponent,
                e.measured_slope, e.pass ? "pass" : "FAIL");
}

void print_rates(const pf::SweepTable& t) {
  for (const auto& [scheme, fits] : t.rates) {
    std::printf("rates %s\n", std::string(pf::scheme_name(scheme)).c_str());
    for (const char* metric : pf::ErrorRecord::kMetricNames) {
      auto it = fits.find(metric);
      if (it == fits.end()) continue;
      std::printf("  %-20s slope %+.4f  (%d points)\n", metric, it->second.slope, it->second.points_used);
    }
  }
}

pf::RunManifest manifest_for(const pf::StudyConfig& c, const std::string& command, const std::string& mesh_fp,
                             const std::string& ref_fp) {
  pf::RunManifest m;
  m.command = command;
  m.config_echo = pf::config_echo(c);
  m.config_fingerprint = pf::config_fingerprint(c);
  m.mesh_fingerprint = mesh_fp;
  m.reference_fingerprint = ref_fp;
  m.run_id = pf::make_run_id(m.config_fingerprint, mesh_fp);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized Navier-Stokes channel-flow solver and study harness"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_version_flag("--version", std::string(pf::kVersion));
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log Newton iterations to stderr");

  // mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "Generate and write a mesh");
  std::string mesh_case = "box_wall", mesh_out;
  double mesh_h = 0.05;
  int mesh_segments = 64;
  mesh_cmd->add_option("--case", mesh_case, "box_wall | sharp_corner | two_obstacles | no_obstacle");
  mesh_cmd->add_option("--h", mesh_h, "Target mesh size");
  mesh_cmd->add_option("--circle-segments", mesh_segments, "Polygon sides of the immersed disk");
  mesh_cmd->add_option("--out", mesh_out, "Output mesh file")->required();

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Single solve with VTK export");
  std::string solve_cfg, solve_scheme = "viscosity", solve_out;
  double solve_m = 1.0, solve_n = 0.0;
  solve_cmd->add_option("--config", solve_cfg, "Run configuration")->required();
  solve_cmd->add_option("--scheme", solve_scheme, "real | volume | viscosity | mixed");
  solve_cmd->add_option("--m", solve_m, "Viscosity penalty");
  solve_cmd->add_option("--n", solve_n, "Volume penalty");
  solve_cmd->add_option("--out", solve_out, "Output VTK file")->required();

  // sweep / contour
  auto* sweep_cmd = app.add_subcommand("sweep", "Penalty sweeps per scheme");
  std::string sweep_cfg, sweep_out;
  sweep_cmd->add_option("--config", sweep_cfg, "Run configuration")->required();
  sweep_cmd->add_option("--out", sweep_out, "Output directory")->required();
  auto* contour_cmd = app.add_subcommand("contour", "Mixed-scheme (m, n) grid");
  std::string contour_cfg, contour_out;
  contour_cmd->add_option("--config", contour_cfg, "Run configuration")->required();
  contour_cmd->add_option("--out", contour_out, "Output directory")->required();

  // mms
  auto* mms_cmd = app.add_subcommand("mms", "Manufactured-solution convergence study");
  int mms_levels = 4;
  double mms_h = 0.4;
  std::string mms_out;
  mms_cmd->add_option("--levels", mms_levels, "Number of nested meshes");
  mms_cmd->add_option("--base-h", mms_h, "Coarsest mesh size");
  mms_cmd->add_option("--out", mms_out, "Output CSV")->required();

  // rates
  auto* rates_cmd = app.add_subcommand("rates", "Fit rates and check bounds from a sweep CSV");
  std::string rates_in, rates_window = "1e6:1e10", rates_case = "box_wall";
  rates_cmd->add_option("--in", rates_in, "Sweep CSV")->required();
  rates_cmd->add_option("--window", rates_window, "Fit window lo:hi");
  rates_cmd->add_option("--case", rates_case, "Geometry the sweep was run on");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw pf::ConfigError(e.what());
    }

    if (*mesh_cmd) {
      const pf::Geometry g = pf::make_geometry(pf::parse_case(mesh_case), mesh_segments);
      const pf::Mesh mesh = pf::generate_mesh(g, mesh_h);
      pf::write_mesh(mesh, mesh_out);
      const auto q = pf::mesh_quality(mesh);
      std::printf("mesh %s: %zu vertices, %zu triangles, min angle %.2f deg\n", mesh_out.c_str(),
                  mesh.vertices.size(), mesh.triangles.size(), q.min_angle_deg);
    } else if (*solve_cmd) {
      const pf::StudyConfig c = load(solve_cfg, verbose);
      const pf::Scheme scheme = pf::parse_scheme(solve_scheme);
      double m = solve_m, n = solve_n;
      if (scheme == pf::Scheme::Volume) m = 1.0;
      if (scheme == pf::Scheme::Viscosity) n = 0.0;
      if (scheme == pf::Scheme::Real) m = 1.0, n = 0.0;
      const auto t0 = std::chrono::steady_clock::now();
      const pf::SingleSolve s = pf::solve_single(c, scheme, m, n);
      const auto& d = s.solution.diagnostics;
      const std::string run_id = pf::make_run_id(pf::config_fingerprint(c), pf::mesh_fingerprint(s.disc->mesh()));
      pf::write_vtk(s.disc->mesh(), s.disc->spaces(), s.solution, solve_out, "penalflow run_id=" + run_id);
      std::printf("solve %s m=%g n=%g: %s, %d stages, relative residual %.3e, %.1f s\n",
                  std::string(pf::scheme_name(scheme)).c_str(), m, n, d.converged ? "converged" : "NOT converged",
                  d.stages, d.final_residual, seconds_since(t0));
      if (s.error)
        std::printf("err_H1semi_Omega %.8e err_L2_Omega %.8e norm_H1semi_OmegaS %.8e norm_L2_OmegaS %.8e\n",
                    s.error->err_H1semi_Omega, s.error->err_L2_Omega, s.error->norm_H1semi_OmegaS,
                    s.error->norm_L2_OmegaS);
      if (!d.converged) throw pf::SolverError("Newton iteration did not converge");
    } else if (*sweep_cmd) {
      const pf::StudyConfig c = load(sweep_cfg, verbose);
      const auto t0 = std::chrono::steady_clock::now();
      const pf::StudyContext ctx = pf::prepare_study(c);
      const pf::SweepTable t = pf::run_sweep(c, ctx);
      pf::RunManifest man = manifest_for(c, "sweep", ctx.mesh_fingerprint, ctx.reference_fingerprint);
      const std::filesystem::path dir(sweep_out);
      pf::write_csv(pf::records_of(t), (dir / "sweep.csv").string(), man.run_id);
      man.outputs.push_back("sweep.csv");
      for (const auto& r : t.records) man.solves.push_back(pf::record_json(r));
      man.timings["reference_seconds"] = ctx.reference_seconds;
      man.timings["total_seconds"] = seconds_since(t0);
      nlohmann::json bounds = nlohmann::json::array();
      print_rates(t);
      for (pf::Scheme s : c.schemes) {
        try {
          const auto rep = pf::check_bounds(t, s);
          print_bounds(rep);
          for (const auto& e : rep.entries)
            bounds.push_back({{"scheme", pf::scheme_name(s)}, {"bound", e.id}, {"metric", e.metric},
                              {"exponent", e.exponent}, {"slope", e.measured_slope}, {"pass", e.pass}});
        } catch (const pf::InsufficientData& e) {
          std::printf("bounds %s: %s\n", std::string(pf::scheme_name(s)).c_str(), e.what());
        }
      }
      man.extra["bounds"] = bounds;
      pf::write_manifest(man, (dir / "manifest.json").string());
      std::printf("wrote %s\n", (dir / "sweep.csv").string().c_str());
    } else if (*contour_cmd) {
      const pf::StudyConfig c = load(contour_cfg, verbose);
      const auto t0 = std::chrono::steady_clock::now();
      const pf::StudyContext ctx = pf::prepare_study(c);
      const pf::ContourGrid g = pf::run_contour(c, ctx);
      pf::RunManifest man = manifest_for(c, "contour", ctx.mesh_fingerprint, ctx.reference_fingerprint);
      const std::filesystem::path dir(contour_out);
      pf::write_csv(pf::records_of(g), (dir / "contour.csv").string(), man.run_id);
      man.outputs.push_back("contour.csv");
      for (const auto& r : g.cells) man.solves.push_back(pf::record_json(r));
      man.timings["reference_seconds"] = ctx.reference_seconds;
      man.timings["total_seconds"] = seconds_since(t0);
      nlohmann::json laws = nlohmann::json::array();
      for (const char* metric : pf::ErrorRecord::kMetricNames) {
        try {
          const auto fit = pf::fit_max_law(g, metric);
          const bool mono_m = pf::contour_monotone(g, metric, true);
          const bool mono_n = pf::contour_monotone(g, metric, false);
          std::printf("max-law %-20s C %.3e slope %+.3f R2 %.4f monotone(m) %s monotone(n) %s\n", metric, fit.C,
                      fit.slope, fit.r_squared, mono_m ? "yes" : "no", mono_n ? "yes" : "no");
          laws.push_back({{"metric", metric}, {"C", fit.C}, {"slope", fit.slope}, {"r_squared", fit.r_squared},
                          {"monotone_m", mono_m}, {"monotone_n", mono_n}});
        } catch (const pf::InsufficientData& e) {
          std::printf("max-law %s: %s\n", metric, e.what());
        }
      }
      man.extra["max_law"] = laws;
      pf::write_manifest(man, (dir / "manifest.json").string());
      std::printf("wrote %s\n", (dir / "contour.csv").string().c_str());
    } else if (*mms_cmd) {
      pf::SolverConfig sc;
      if (verbose) sc.log = [](const std::string& line) { std::cerr << line << "\n"; };
      const pf::MmsTable t = pf::run_mms(mms_levels, mms_h, 1.0, false, sc);
      auto out = std::ofstream(mms_out);
      if (!out) throw pf::IoError("cannot write '" + mms_out + "'");
      out << "h,dofs,err_L2,err_H1,newton_iters\n";
      char buf[160];
      for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof buf, "%.8e,%d,%.8e,%.8e,%d\n", r.h, r.dofs, r.err_L2, r.err_H1, r.newton_iterations);
        out << buf;
        std::printf("h %.4f dofs %7d L2 %.4e H1 %.4e\n", r.h, r.dofs, r.err_L2, r.err_H1);
      }
      if (!out) throw pf::IoError("write to '" + mms_out + "' failed");
      std::printf("order L2 %.3f H1 %.3f\n", t.order_L2, t.order_H1);
    } else if (*rates_cmd) {
      const auto [lo, hi] = parse_window(rates_window);
      const pf::Geometry g = pf::make_geometry(pf::parse_case(rates_case));
      bool touch = true;
      for (const auto& ob : g.obstacles) touch = touch && pf::touches_channel_boundary(g, ob);
      const auto csv = pf::read_csv(rates_in);
      const pf::SweepTable t = pf::sweep_from_records(csv.records, lo, hi, touch);
      print_rates(t);
      for (const auto& [scheme, fits] : t.rates) print_bounds(pf::check_bounds(t, scheme));
    }
  } catch (const pf::Error& e) {
    std::fprintf(stderr, "penalflow: error[%s]: %s\n", e.kind().c_str(), e.what());
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "penalflow: error[internal]: %s\n", e.what());
    return static_cast<int>(pf::ExitCode::Solver);
  }
  return 0;
}
