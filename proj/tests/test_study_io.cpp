#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace penalflow;

namespace {

StudyConfig coarse_config(CaseId id) {
  StudyConfig c;
  c.case_id = id;
  c.h = 0.25;
  return c;
}

SweepTable synthetic_table(Scheme s, double slope, bool touch = true) {
  SweepTable t;
  t.all_obstacles_touch_boundary = touch;
  for (int k = 6; k <= 10; ++k) {
    StudyRecord r;
    r.error.scheme = s;
    const double p = std::pow(10.0, k);
    if (s == Scheme::Volume) r.error.n = p;
    else r.error.m = p, r.error.n = s == Scheme::Mixed ? 100 * p : 0.0;
    const double v = std::pow(p, slope);
    r.error.err_L2_Omega = r.error.err_H1semi_Omega = r.error.err_L2_OmegaF = v;
    r.error.err_H1semi_OmegaF = r.error.norm_L2_OmegaS = r.error.norm_H1semi_OmegaS = v;
    t.records.push_back(r);
  }
  return t;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("penalflow_test_" + name);
}

}  // namespace

// ------------------------------------------------------------------ config

TEST(Config, MinimalDocumentDefaults) {
  const StudyConfig c = parse_config("case = box_wall\n");
  EXPECT_EQ(c.case_id, CaseId::BoxWall);
  EXPECT_DOUBLE_EQ(c.nu, 1.0);
  EXPECT_DOUBLE_EQ(c.U, 100.0);
  EXPECT_DOUBLE_EQ(c.h, 0.05);
  EXPECT_EQ(c.schemes, (std::vector<Scheme>{Scheme::Volume, Scheme::Viscosity, Scheme::Mixed}));
  EXPECT_DOUBLE_EQ(c.coupling, 100.0);
}

TEST(Config, FullDocument) {
  const StudyConfig c = parse_config(
      "# comment\ncase = two_obstacles\nh = 0.1  # trailing\nschemes = volume, mixed\n"
      "penalty.m = 1e2:1e4\npenalty.n = 10, 1e3\ncoupling = \"n=m\"\nwindow = 1e2:1e4\n"
      "threads = 2\nnewton.max_iter = 30\nlinear.solver = iterative\n");
  EXPECT_EQ(c.case_id, CaseId::TwoObstacles);
  EXPECT_DOUBLE_EQ(c.h, 0.1);
  EXPECT_EQ(c.schemes, (std::vector<Scheme>{Scheme::Volume, Scheme::Mixed}));
  EXPECT_EQ(c.m_values, (std::vector<double>{1e2, 1e3, 1e4}));
  EXPECT_EQ(c.n_values, (std::vector<double>{10, 1e3}));
  EXPECT_DOUBLE_EQ(c.coupling, 1.0);
  EXPECT_EQ(c.threads, 2);
  EXPECT_EQ(c.solver.max_newton_iterations, 30);
  EXPECT_EQ(c.solver.linear_policy, LinearPolicy::Iterative);
}

TEST(Config, CouplingForms) {
  EXPECT_DOUBLE_EQ(parse_coupling("\"n=100*m\""), 100.0);
  EXPECT_DOUBLE_EQ(parse_coupling("n = 1e2 * m"), 100.0);
  EXPECT_THROW(parse_coupling("m=n"), ConfigError);
}

TEST(Config, Errors) {
  const auto message = [](const std::string& doc) {
    try {
      parse_config(doc);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("case = box_wall\npenalty.n = -1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("case = box_wall\npenalty.n = -1\n").find("penalty.n"), std::string::npos);
  EXPECT_NE(message("case = box_wall\ncolour = red\n").find("unknown key"), std::string::npos);
  EXPECT_NE(message("h = 0.1\n").find("case"), std::string::npos);
  EXPECT_NE(message("case = box_wall\ncase = box_wall\n").find("twice"), std::string::npos);
  EXPECT_NE(message("case = box_wall\nh 0.1\n").find("line 2"), std::string::npos);
  EXPECT_FALSE(message("case = moon\n").empty());
  EXPECT_FALSE(message("case = box_wall\nschemes = real\n").empty());
  EXPECT_FALSE(message("case = box_wall\npenalty.m = 1e2:5e3\n").empty());
}

TEST(Config, EnvironmentThreads) {
  StudyConfig c = parse_config("case = box_wall\n");
  ::setenv("PENALFLOW_THREADS", "3", 1);
  apply_environment(c);
  EXPECT_EQ(c.threads, 3);
  ::setenv("PENALFLOW_THREADS", "zero", 1);
  EXPECT_THROW(apply_environment(c), ConfigError);
  ::unsetenv("PENALFLOW_THREADS");
}

TEST(Config, LoadMissingFileIsIoError) {
  EXPECT_THROW(load_config("/nonexistent/penalflow.cfg"), IoError);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"box_wall.cfg", "box_wall_ci.cfg", "sharp_corner.cfg", "two_obstacles.cfg"})
    EXPECT_NO_THROW(load_config(std::string(PENALFLOW_SOURCE_DIR) + "/configs/" + name)) << name;
}

TEST(Config, FingerprintTracksInputs) {
  StudyConfig a = parse_config("case = box_wall\n");
  StudyConfig b = a;
  EXPECT_EQ(config_fingerprint(a), config_fingerprint(b));
  b.h = 0.04;
  EXPECT_NE(config_fingerprint(a), config_fingerprint(b));
}

TEST(Config, ContourAxesDefaults) {
  StudyConfig c = parse_config("case = two_obstacles\nprofile = ci\n");
  const auto [m, n] = c.contour_axes();
  EXPECT_EQ(m, (std::vector<double>{1e4, 1e6, 1e8, 1e10}));
  for (double v : n) EXPECT_GE(v, 1e7);
  EXPECT_EQ(decades(1, 3), (std::vector<double>{10, 100, 1000}));
}

// ------------------------------------------------------------------ io

TEST(Csv, EmptyTableIsHeaderOnly) {
  std::ostringstream os;
  write_csv({}, os);
  EXPECT_EQ(os.str(), std::string(kCsvHeader) + "\n");
  std::istringstream is(os.str());
  EXPECT_TRUE(read_csv(is).records.empty());
}

TEST(Csv, RoundTrip) {
  ErrorRecord r;
  r.scheme = Scheme::Mixed;
  r.m = 1e6;
  r.n = 1e8;
  r.err_L2_Omega = 1.23456789e-3;
  r.err_H1semi_Omega = 2.5e-2;
  r.err_L2_OmegaF = 1e-3;
  r.err_H1semi_OmegaF = 2e-2;
  r.norm_L2_OmegaS = 3e-4;
  r.norm_H1semi_OmegaS = 4e-3;
  r.newton_iterations = 7;
  std::ostringstream os;
  write_csv({r}, os, "abc123");
  std::string text = os.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);  // header, row, run_id trailer
  std::istringstream is(text);
  const CsvContents back = read_csv(is);
  ASSERT_EQ(back.records.size(), 1u);
  EXPECT_EQ(back.run_id, "abc123");
  const auto& b = back.records[0];
  EXPECT_EQ(b.scheme, r.scheme);
  EXPECT_EQ(b.m, r.m);
  EXPECT_EQ(b.n, r.n);
  for (const char* m : ErrorRecord::kMetricNames) EXPECT_EQ(b.metric(m), r.metric(m)) << m;
  EXPECT_EQ(b.newton_iterations, 7);
  EXPECT_TRUE(b.converged);
}

TEST(Csv, FailedRowHasEmptyMetrics) {
  ErrorRecord r;
  r.scheme = Scheme::Volume;
  r.n = 1e6;
  r.converged = false;
  std::ostringstream os;
  write_csv_row(os, r);
  EXPECT_NE(os.str().find(",,,,,,"), std::string::npos);
  std::istringstream is(std::string(kCsvHeader) + "\n" + os.str());
  const auto back = read_csv(is).records.at(0);
  EXPECT_FALSE(back.converged);
  EXPECT_TRUE(std::isnan(back.err_L2_Omega));
}

TEST(Csv, MalformedInput) {
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(read_csv(bad_header), IoError);
  std::istringstream short_row(std::string(kCsvHeader) + "\nvolume,1,2\n");
  EXPECT_THROW(read_csv(short_row), IoError);
  EXPECT_THROW(read_csv("/nonexistent.csv"), IoError);
}

TEST(MeshIo, RoundTripIsExact) {
  const Mesh& m = pftest::coarse_box_wall();
  std::stringstream ss;
  write_mesh(m, ss);
  const Mesh back = read_mesh(ss);
  EXPECT_EQ(mesh_fingerprint(back), mesh_fingerprint(m));
  const auto path = temp_path("mesh.txt");
  write_mesh(m, path.string());
  EXPECT_EQ(mesh_fingerprint(read_mesh(path.string())), mesh_fingerprint(m));
  std::filesystem::remove(path);
}

TEST(MeshIo, ErrorsCarryLineNumbers) {
  std::istringstream truncated(std::string(kMeshHeader) + "\n3\n0 0\n1 0\n");
  try {
    read_mesh(truncated, "m.txt");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("m.txt:"), std::string::npos);
  }
  std::istringstream wrong("not a mesh\n");
  EXPECT_THROW(read_mesh(wrong), IoError);
  std::istringstream invalid(std::string(kMeshHeader) + "\n3\n0 0\n1 0\n0 1\n1\n0 2 1 0\n0\n");
  EXPECT_THROW(read_mesh(invalid), IoError);
}

TEST(Vtk, QuadraticCells) {
  const Mesh m = pftest::two_triangles();
  const Spaces s = build_spaces(m);
  Solution sol;
  sol.velocity = Eigen::VectorXd::Ones(s.n_u());
  sol.pressure = Eigen::VectorXd::Zero(s.n_p());
  std::ostringstream os;
  write_vtk(m, s, sol, os, "t");
  const std::string v = os.str();
  EXPECT_NE(v.find("POINTS 9 double"), std::string::npos);
  EXPECT_NE(v.find("CELLS 2 14"), std::string::npos);
  EXPECT_NE(v.find("CELL_TYPES 2\n22\n22\n"), std::string::npos);
  EXPECT_NE(v.find("VECTORS velocity double"), std::string::npos);
  EXPECT_NE(v.find("SCALARS pressure double 1"), std::string::npos);
  sol.pressure.resize(1);
  EXPECT_THROW(write_vtk(m, s, sol, os), InvalidInput);
}

TEST(Manifest, JsonFields) {
  RunManifest mf;
  mf.run_id = make_run_id("a", "b");
  EXPECT_EQ(mf.run_id, make_run_id("a", "b"));
  EXPECT_NE(mf.run_id, make_run_id("a", "c"));
  const auto j = mf.to_json();
  EXPECT_EQ(j.at("tool"), "penalflow");
  EXPECT_TRUE(j.contains("mesh_fingerprint"));
}

// ------------------------------------------------------------------ study

TEST(Bounds, SyntheticFlatFailsEverything) {
  for (Scheme s : {Scheme::Volume, Scheme::Viscosity, Scheme::Mixed}) {
    const BoundReport rep = check_bounds(synthetic_table(s, 0.0), s);
    ASSERT_FALSE(rep.entries.empty());
    for (const auto& e : rep.entries) EXPECT_FALSE(e.pass) << e.id;
  }
}

TEST(Bounds, LinearDecayPassesEverything) {
  for (Scheme s : {Scheme::Volume, Scheme::Viscosity, Scheme::Mixed})
    EXPECT_TRUE(check_bounds(synthetic_table(s, -1.0), s).all_pass());
}

TEST(Bounds, VolumeQuarterRateBoundary) {
  const BoundReport rep = check_bounds(synthetic_table(Scheme::Volume, -0.2), Scheme::Volume);
  for (const auto& e : rep.entries) EXPECT_EQ(e.pass, e.exponent <= 0.35) << e.id;
}

TEST(Bounds, TouchRule) {
  EXPECT_TRUE(applicable_bounds(Scheme::Viscosity, false).empty());
  EXPECT_EQ(applicable_bounds(Scheme::Mixed, false).size(), 3u);
  EXPECT_EQ(applicable_bounds(Scheme::Mixed, true).size(), 9u);
  EXPECT_EQ(applicable_bounds(Scheme::Volume, false).size(), 3u);
}

TEST(MaxLaw, RecoversSyntheticLaw) {
  ContourGrid g;
  g.m_axis = {1e4, 1e6, 1e8, 1e10};
  g.n_axis = {1e4, 1e6, 1e8, 1e10};
  const double C = 0.05;
  for (double m : g.m_axis)
    for (double n : g.n_axis) {
      StudyRecord r;
      r.error.scheme = Scheme::Mixed;
      r.error.m = m;
      r.error.n = n;
      r.error.err_H1semi_Omega = 3.0 / std::max(m, C * n);
      g.cells.push_back(r);
    }
  const MaxLawFit f = fit_max_law(g, "err_H1semi_Omega");
  EXPECT_NEAR(f.slope, -1.0, 1e-6);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-9);
  EXPECT_TRUE(contour_monotone(g, "err_H1semi_Omega", true));
  EXPECT_TRUE(contour_monotone(g, "err_H1semi_Omega", false));
  g.cells[5].error.err_H1semi_Omega *= 100.0;
  EXPECT_FALSE(contour_monotone(g, "err_H1semi_Omega", true) && contour_monotone(g, "err_H1semi_Omega", false));
}

TEST(Study, NoObstacleSweepMatchesReference) {
  StudyConfig c = coarse_config(CaseId::NoObstacle);
  c.h = 0.5;
  c.m_values = {1e2, 1e6};
  c.n_values = {1e2, 1e6};
  const SweepTable t = run_sweep(c);
  ASSERT_EQ(t.records.size(), 6u);
  for (const auto& r : t.records) {
    EXPECT_TRUE(r.error.converged);
    EXPECT_TRUE(r.certified);
    EXPECT_LE(r.error.err_H1semi_Omega, 1e-8);
  }
}

TEST(Study, ContourRowsReduceToPureSchemes) {
  StudyConfig c = coarse_config(CaseId::BoxWall);
  c.schemes = {Scheme::Volume};
  c.n_values = {1e2, 1e4, 1e6};
  c.contour_m = {1.0, 1e3, 1e5};
  c.contour_n = {1e2, 1e4, 1e6};
  const StudyContext ctx = prepare_study(c);
  const ContourGrid g = run_contour(c, ctx);
  const SweepTable t = run_sweep(c, ctx);
  for (std::size_t j = 0; j < 3; ++j)
    for (const char* metric : ErrorRecord::kMetricNames) {
      const double a = g.at(0, j).error.metric(metric), b = t.records[j].error.metric(metric);
      EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, b)) << metric;
    }

  FlowProblem visc{ctx.global, Coefficients::viscosity(1.0, 1e5), c.boundary_conditions(), {}};
  FlowProblem mixed = visc;
  mixed.coeffs = Coefficients::mixed(1.0, 1e5, 0.0);
  const Solution a = continuation_solve(visc), b = continuation_solve(mixed);
  EXPECT_LE((a.velocity - b.velocity).lpNorm<Eigen::Infinity>(), 1e-12 * a.velocity.lpNorm<Eigen::Infinity>());
}

TEST(Study, ReferenceIsZeroInSolid) {
  const StudyContext ctx = prepare_study(coarse_config(CaseId::BoxWall));
  EXPECT_TRUE(ctx.all_obstacles_touch_boundary);
  EXPECT_EQ(norm_l2(ctx.reference_global, ctx.global->spaces(), ctx.global->mesh(), Region::solid()).value, 0.0);
  EXPECT_TRUE(ctx.reference.diagnostics.converged);
  StudyConfig c2 = coarse_config(CaseId::TwoObstacles);
  c2.circle_segments = 16;
  const StudyContext two = prepare_study(c2);
  EXPECT_FALSE(two.all_obstacles_touch_boundary);
}

TEST(Mms, LinearFieldIsExact) {
  const MmsTable t = run_mms(2, 1.0, 1.0, true);
  for (const auto& r : t.rows) {
    EXPECT_LE(r.err_L2, 1e-10);
    EXPECT_LE(r.err_H1, 1e-10);
  }
}

TEST(Mms, CoarseOrders) {
  const MmsTable t = run_mms(3, 0.4);
  EXPECT_GE(t.order_H1, 1.8);
  EXPECT_GE(t.order_L2, 2.7);
}
