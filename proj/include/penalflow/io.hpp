#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "penalflow/errors.hpp"
#include "penalflow/mesh.hpp"
#include "penalflow/metrics.hpp"
#include "penalflow/problem.hpp"
#include "penalflow/spaces.hpp"
#include "penalflow/study.hpp"

namespace penalflow {

#ifndef PENALFLOW_VERSION
#define PENALFLOW_VERSION "unknown"
#endif

inline constexpr const char* kVersion = PENALFLOW_VERSION;
inline constexpr const char* kMeshHeader = "penalflow-mesh v1";
inline constexpr const char* kCsvHeader =
    "scheme,m,n,err_L2_Omega,err_H1semi_Omega,err_L2_OmegaF,err_H1semi_OmegaF,norm_L2_OmegaS,"
    "norm_H1semi_OmegaS,newton_iters,converged";

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline void finish_write(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------- mesh text

inline void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << kMeshHeader << "\n" << mesh.vertices.size() << "\n";
  for (const auto& v : mesh.vertices) out << detail::fmt("%.17g", v.x) << " " << detail::fmt("%.17g", v.y) << "\n";
  out << mesh.triangles.size() << "\n";
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    out << tri[0] << " " << tri[1] << " " << tri[2] << " " << mesh.region[t] << "\n";
  }
  out << mesh.facets.size() << "\n";
  for (const auto& f : mesh.facets) out << f.v0 << " " << f.v1 << " " << facet_tag_name(f.tag) << "\n";
}

inline void write_mesh(const Mesh& mesh, const std::string& path) {
  auto out = detail::open_for_write(path);
  write_mesh(mesh, out);
  detail::finish_write(out, path);
}

/// Reads the text format written by write_mesh and validates the result.
inline Mesh read_mesh(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  int line_no = 0;
  const auto fail = [&](const std::string& what) -> IoError {
    return IoError(name + ":" + std::to_string(line_no) + ": " + what);
  };
  const auto next = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return std::istringstream(line);
    }
    throw fail("unexpected end of file");
  };
  const auto count = [&](const char* what) {
    auto s = next();
    long long n = -1;
    std::string rest;
    if (!(s >> n) || n < 0 || (s >> rest)) throw fail(std::string("expected ") + what + " count");
    return static_cast<std::size_t>(n);
  };
  {
    next();
    if (line != kMeshHeader) throw fail("missing header '" + std::string(kMeshHeader) + "'");
  }
  Mesh mesh;
  const std::size_t nv = count("vertex");
  mesh.vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    auto s = next();
    std::string xs, ys, rest;
    if (!(s >> xs >> ys) || (s >> rest)) throw fail("expected 'x y'");
    try {
      std::size_t px = 0, py = 0;
      const double x = std::stod(xs, &px), y = std::stod(ys, &py);
      if (px != xs.size() || py != ys.size()) throw std::invalid_argument("trailing");
      mesh.vertices.push_back({x, y});
    } catch (const std::exception&) {
      throw fail("malformed coordinate");
    }
  }
  const std::size_t nt = count("triangle");
  for (std::size_t i = 0; i < nt; ++i) {
    auto s = next();
    std::array<int, 3> tri{};
    int region = 0;
    std::string rest;
    if (!(s >> tri[0] >> tri[1] >> tri[2] >> region) || (s >> rest)) throw fail("expected 'v0 v1 v2 region'");
    mesh.triangles.push_back(tri);
    mesh.region.push_back(region);
  }
  const std::size_t nf = count("facet");
  for (std::size_t i = 0; i < nf; ++i) {
    auto s = next();
    Facet f;
    std::string tag, rest;
    if (!(s >> f.v0 >> f.v1 >> tag) || (s >> rest)) throw fail("expected 'v0 v1 tag'");
    try {
      f.tag = parse_facet_tag(tag);
    } catch (const InvalidInput& e) {
      throw fail(e.what());
    }
    mesh.facets.push_back(f);
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw fail("trailing content");
  }
  try {
    validate_mesh(mesh);
  } catch (const InvalidInput& e) {
    throw IoError(name + ": invalid mesh: " + e.what());
  }
  return mesh;
}

inline Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  return read_mesh(in, path);
}

// ---------------------------------------------------------------- CSV

inline void write_csv_row(std::ostream& out, const ErrorRecord& r) {
  out << scheme_name(r.scheme) << "," << detail::fmt("%.8e", r.m) << "," << detail::fmt("%.8e", r.n);
  const double vals[6] = {r.err_L2_Omega,      r.err_H1semi_Omega,  r.err_L2_OmegaF,
                          r.err_H1semi_OmegaF, r.norm_L2_OmegaS,    r.norm_H1semi_OmegaS};
  for (double v : vals) {
    out << ",";
    if (r.converged) out << detail::fmt("%.8e", v);
  }
  out << "," << r.newton_iterations << "," << (r.converged ? "true" : "false") << "\n";
}

/// Header, one row per record, and an optional `# run_id=` trailer.
inline void write_csv(const std::vector<ErrorRecord>& records, std::ostream& out, const std::string& run_id = {}) {
  out << kCsvHeader << "\n";
  for (const auto& r : records) write_csv_row(out, r);
  if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
}

inline void write_csv(const std::vector<ErrorRecord>& records, const std::string& path,
                      const std::string& run_id = {}) {
  auto out = detail::open_for_write(path);
  write_csv(records, out, run_id);
  detail::finish_write(out, path);
}

inline std::vector<ErrorRecord> records_of(const SweepTable& t) {
  std::vector<ErrorRecord> v;
  for (const auto& r : t.records) v.push_back(r.error);
  return v;
}

inline std::vector<ErrorRecord> records_of(const ContourGrid& g) {
  std::vector<ErrorRecord> v;
  for (const auto& r : g.cells) v.push_back(r.error);
  return v;
}

struct CsvContents {
  std::vector<ErrorRecord> records;
  std::string run_id;
};

inline CsvContents read_csv(std::istream& in, const std::string& name = "<stream>") {
  CsvContents out;
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string key = "# run_id=";
      if (line.rfind(key, 0) == 0) out.run_id = line.substr(key.size());
      continue;
    }
    const auto where = name + ":" + std::to_string(line_no) + ": ";
    if (!header) {
      if (line != kCsvHeader) throw IoError(where + "unexpected CSV header");
      header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        cells.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (cells.size() != 11) throw IoError(where + "expected 11 columns, got " + std::to_string(cells.size()));
    ErrorRecord r;
    try {
      r.scheme = parse_scheme(cells[0]);
      r.m = std::stod(cells[1]);
      r.n = std::stod(cells[2]);
      if (cells[10] == "true") r.converged = true;
      else if (cells[10] == "false") r.converged = false;
      else throw std::invalid_argument("converged flag");
      double* fields[6] = {&r.err_L2_Omega,      &r.err_H1semi_Omega, &r.err_L2_OmegaF,
                           &r.err_H1semi_OmegaF, &r.norm_L2_OmegaS,   &r.norm_H1semi_OmegaS};
      for (int k = 0; k < 6; ++k) {
        const auto& c = cells[static_cast<std::size_t>(3 + k)];
        *fields[k] = c.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(c);
      }
      r.newton_iterations = cells[9].empty() ? 0 : std::stoi(cells[9]);
    } catch (const std::exception&) {
      throw IoError(where + "malformed row");
    }
    out.records.push_back(r);
  }
  if (!header) throw IoError(name + ": missing CSV header");
  return out;
}

inline CsvContents read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path + "'");
  return read_csv(in, path);
}

/// Rebuilds a sweep table (records and rate fits) from CSV rows.
inline SweepTable sweep_from_records(const std::vector<ErrorRecord>& records, double lo, double hi,
                                     bool all_obstacles_touch_boundary) {
  SweepTable t;
  t.window_lo = lo;
  t.window_hi = hi;
  t.all_obstacles_touch_boundary = all_obstacles_touch_boundary;
  std::vector<Scheme> schemes;
  for (const auto& r : records) {
    StudyRecord s;
    s.error = r;
    t.records.push_back(s);
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end()) schemes.push_back(r.scheme);
  }
  for (Scheme s : schemes)
    for (const char* metric : ErrorRecord::kMetricNames) {
      try {
        t.rates[s][metric] = fit_rate(t.series(s, metric), lo, hi);
      } catch (const InsufficientData&) {
      }
    }
  return t;
}

// ---------------------------------------------------------------- VTK

/// Legacy ASCII unstructured grid with 6-node quadratic triangles.
inline void write_vtk(const Mesh& mesh, const Spaces& spaces, const Solution& s, std::ostream& out,
                      const std::string& title = "penalflow") {
  if (s.velocity.size() != spaces.n_u() || s.pressure.size() != spaces.n_p())
    throw InvalidInput("solution does not match the mesh spaces");
  const int nn = spaces.n_nodes();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nn << " double\n";
  for (const auto& p : spaces.node_coords) out << detail::fmt("%.17g", p.x) << " " << detail::fmt("%.17g", p.y) << " 0\n";
  const std::size_t nt = mesh.triangles.size();
  out << "CELLS " << nt << " " << nt * 7 << "\n";
  for (const auto& nodes : spaces.p2_nodes) {
    out << 6;
    for (int v : nodes) out << " " << v;
    out << "\n";
  }
  out << "CELL_TYPES " << nt << "\n";
  for (std::size_t t = 0; t < nt; ++t) out << "22\n";
  out << "CELL_DATA " << nt << "\nSCALARS region int 1\nLOOKUP_TABLE default\n";
  for (int r : mesh.region) out << r << "\n";
  out << "POINT_DATA " << nn << "\nVECTORS velocity double\n";
  for (int i = 0; i < nn; ++i)
    out << detail::fmt("%.10e", s.velocity[spaces.velocity_dof(i, 0)]) << " "
        << detail::fmt("%.10e", s.velocity[spaces.velocity_dof(i, 1)]) << " 0\n";
  out << "SCALARS pressure double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < spaces.n_vertices; ++v) out << detail::fmt("%.10e", s.pressure[v]) << "\n";
  for (const auto& [a, b] : spaces.edges) out << detail::fmt("%.10e", 0.5 * (s.pressure[a] + s.pressure[b])) << "\n";
}

inline void write_vtk(const Mesh& mesh, const Spaces& spaces, const Solution& s, const std::string& path,
                      const std::string& title = "penalflow") {
  auto out = detail::open_for_write(path);
  write_vtk(mesh, spaces, s, out, title);
  detail::finish_write(out, path);
}

// ---------------------------------------------------------------- manifest

/// Deterministic run id from the inputs.
inline std::string make_run_id(const std::string& config_fp, const std::string& mesh_fp) {
  Fingerprint f;
  f.add(std::string(kVersion));
  f.add(config_fp);
  f.add(mesh_fp);
  return f.hex();
}

inline nlohmann::json record_json(const StudyRecord& r) {
  nlohmann::json j;
  j["scheme"] = std::string(scheme_name(r.error.scheme));
  j["m"] = r.error.m;
  j["n"] = r.error.n;
  j["converged"] = r.error.converged;
  j["newton_iterations"] = r.error.newton_iterations;
  j["max_stage_iterations"] = r.max_stage_iterations;
  j["stages"] = r.stages;
  j["certified"] = r.certified;
  j["final_residual"] = r.final_residual;
  j["roundoff_stop"] = r.roundoff_stop;
  j["seconds"] = r.seconds;
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j;
}

struct RunManifest {
  std::string run_id;
  std::string command;
  std::string config_echo;
  std::string config_fingerprint;
  std::string mesh_fingerprint;
  std::string reference_fingerprint;
  std::vector<std::string> outputs;
  nlohmann::json solves = nlohmann::json::array();
  nlohmann::json timings = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "penalflow";
    j["version"] = kVersion;
    j["run_id"] = run_id;
    j["command"] = command;
    j["config"] = config_echo;
    j["config_fingerprint"] = config_fingerprint;
    j["mesh_fingerprint"] = mesh_fingerprint;
    j["reference_fingerprint"] = reference_fingerprint;
    j["newton_tolerance_mode"] = "relative to the first iterate";
    j["outputs"] = outputs;
    j["solves"] = solves;
    j["timings"] = timings;
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
  }
};

inline void write_manifest(const RunManifest& m, const std::string& path) {
  auto out = detail::open_for_write(path);
  out << m.to_json().dump(2) << "\n";
  detail::finish_write(out, path);
}

}  // namespace penalflow
