#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "penalflow/delaunay.hpp"
#include "penalflow/errors.hpp"
#include "penalflow/geometry.hpp"

namespace penalflow {

enum class FacetTag : int { Inflow = 0, Outflow = 1, Wall = 2, Interface = 3 };

inline std::string_view facet_tag_name(FacetTag t) {
  switch (t) {
    case FacetTag::Inflow: return "inflow";
    case FacetTag::Outflow: return "outflow";
    case FacetTag::Wall: return "wall";
    case FacetTag::Interface: return "interface";
  }
  return "?";
}

inline FacetTag parse_facet_tag(std::string_view s) {
  for (auto t : {FacetTag::Inflow, FacetTag::Outflow, FacetTag::Wall, FacetTag::Interface})
    if (facet_tag_name(t) == s) return t;
  throw InvalidInput("unknown facet tag '" + std::string(s) + "'");
}

struct Facet {
  int v0 = 0;
  int v1 = 0;
  FacetTag tag = FacetTag::Wall;

  friend bool operator==(const Facet&, const Facet&) = default;
};

inline constexpr int kFluidRegion = 0;

/// Interface-conforming triangulation of the channel. Triangles are
/// counterclockwise; region 0 is fluid, region k >= 1 is obstacle k.
struct Mesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> region;
  std::vector<Facet> facets;
  double h_target = 0.0;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  bool is_solid(std::size_t t) const { return region[t] != kFluidRegion; }

  friend bool operator==(const Mesh&, const Mesh&) = default;
};

inline double triangle_area(const Mesh& m, std::size_t t) {
  const auto& tri = m.triangles[t];
  const Point a = m.vertices[static_cast<std::size_t>(tri[0])];
  const Point b = m.vertices[static_cast<std::size_t>(tri[1])];
  const Point c = m.vertices[static_cast<std::size_t>(tri[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

inline std::vector<Facet> boundary_facets(const Mesh& mesh, FacetTag tag) {
  std::vector<Facet> out;
  for (const auto& f : mesh.facets)
    if (f.tag == tag) out.push_back(f);
  return out;
}

inline double facet_length(const Mesh& mesh, const Facet& f) {
  return distance(mesh.vertices[static_cast<std::size_t>(f.v0)],
                  mesh.vertices[static_cast<std::size_t>(f.v1)]);
}

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct EdgeUse {
  int count = 0;
  std::array<int, 2> tri{-1, -1};
};

inline std::unordered_map<std::uint64_t, EdgeUse> edge_uses(const Mesh& m) {
  std::unordered_map<std::uint64_t, EdgeUse> uses;
  uses.reserve(m.triangles.size() * 2);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    for (int i = 0; i < 3; ++i) {
      auto& u = uses[edge_key(tri[static_cast<std::size_t>(i)], tri[static_cast<std::size_t>((i + 1) % 3)])];
      if (u.count < 2) u.tri[static_cast<std::size_t>(u.count)] = static_cast<int>(t);
      ++u.count;
    }
  }
  return uses;
}

}  // namespace detail

/// Checks conformity, orientation and facet bookkeeping. Throws InvalidInput
/// describing the first violation found.
inline void validate_mesh(const Mesh& m) {
  if (m.region.size() != m.triangles.size())
    throw InvalidInput("region tag count does not match triangle count");
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    for (int v : m.triangles[t])
      if (v < 0 || static_cast<std::size_t>(v) >= m.vertices.size())
        throw InvalidInput("triangle " + std::to_string(t) + " references a missing vertex");
    if (!(triangle_area(m, t) > 0.0))
      throw InvalidInput("triangle " + std::to_string(t) + " has non-positive area");
  }
  const auto uses = detail::edge_uses(m);
  std::size_t boundary_edges = 0;
  for (const auto& [key, use] : uses) {
    if (use.count > 2) throw InvalidInput("edge shared by more than two triangles");
    if (use.count == 1) ++boundary_edges;
  }
  std::size_t tagged_boundary = 0;
  for (const auto& f : m.facets) {
    auto it = uses.find(detail::edge_key(f.v0, f.v1));
    if (it == uses.end()) throw InvalidInput("facet is not a mesh edge");
    if (f.tag == FacetTag::Interface) {
      if (it->second.count != 2) throw InvalidInput("interface facet on the mesh boundary");
      const auto r0 = m.region[static_cast<std::size_t>(it->second.tri[0])];
      const auto r1 = m.region[static_cast<std::size_t>(it->second.tri[1])];
      if (r0 == r1) throw InvalidInput("interface facet does not separate regions");
    } else {
      if (it->second.count != 1) throw InvalidInput("boundary facet is an interior edge");
      ++tagged_boundary;
    }
  }
  if (tagged_boundary != boundary_edges)
    throw InvalidInput("boundary facets do not tile the mesh boundary");
}

// ---------------------------------------------------------------------------
// Mesh generation

namespace detail {

struct Segment {
  int a = 0;
  int b = 0;
};

inline double point_segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, {a.x + t * dx, a.y + t * dy});
}

struct InputEdge {
  Point a, b;
  std::string label;
};

/// Splits the channel boundary at obstacle vertices lying on it and collects
/// the obstacle edges that are not part of the channel boundary.
inline std::vector<InputEdge> planar_graph(const Geometry& g) {
  const double L = g.length, H = g.height;
  std::array<std::vector<Point>, 4> sides;  // bottom, right, top, left
  sides[0] = {{0.0, 0.0}, {L, 0.0}};
  sides[1] = {{L, 0.0}, {L, H}};
  sides[2] = {{L, H}, {0.0, H}};
  sides[3] = {{0.0, H}, {0.0, 0.0}};
  for (const auto& ob : g.obstacles) {
    for (const auto& p : ob.polygon) {
      if (p.y == 0.0) sides[0].push_back(p);
      if (p.x == L) sides[1].push_back(p);
      if (p.y == H) sides[2].push_back(p);
      if (p.x == 0.0) sides[3].push_back(p);
    }
  }
  std::vector<InputEdge> edges;
  const char* names[4] = {"bottom wall", "outflow", "top wall", "inflow"};
  for (int s = 0; s < 4; ++s) {
    auto& pts = sides[static_cast<std::size_t>(s)];
    const Point origin = pts.front();
    std::sort(pts.begin(), pts.end(), [&](Point p, Point q) {
      return distance(origin, p) < distance(origin, q);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      edges.push_back({pts[i], pts[i + 1], std::string(names[s]) + " piece " + std::to_string(i)});
  }
  const auto on_same_side = [&](Point a, Point b) {
    return (a.y == 0.0 && b.y == 0.0) || (a.x == L && b.x == L) || (a.y == H && b.y == H) ||
           (a.x == 0.0 && b.x == 0.0);
  };
  for (const auto& ob : g.obstacles) {
    const auto& poly = ob.polygon;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point a = poly[i], b = poly[(i + 1) % poly.size()];
      if (on_same_side(a, b)) continue;
      std::ostringstream label;
      label.precision(17);
      label << "obstacle " << ob.region_id << " edge " << i << " (" << a.x << "," << a.y
            << ")-(" << b.x << "," << b.y << ")";
      edges.push_back({a, b, label.str()});
    }
  }
  return edges;
}

inline Point circumcenter(Point a, Point b, Point c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
}

}  // namespace detail

struct MeshQuality {
  double min_angle_deg = 180.0;
  double max_circumdiameter = 0.0;
};

inline MeshQuality mesh_quality(const Mesh& m) {
  MeshQuality q;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    std::array<Point, 3> p;
    for (int i = 0; i < 3; ++i) p[static_cast<std::size_t>(i)] = m.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(i)])];
    const double l0 = distance(p[1], p[2]), l1 = distance(p[2], p[0]), l2 = distance(p[0], p[1]);
    const double area = triangle_area(m, t);
    const double R = l0 * l1 * l2 / (4.0 * area);
    const double lmin = std::min({l0, l1, l2});
    q.min_angle_deg = std::min(q.min_angle_deg, std::asin(std::min(1.0, lmin / (2.0 * R))) * 180.0 / std::numbers::pi);
    q.max_circumdiameter = std::max(q.max_circumdiameter, 2.0 * R);
  }
  return q;
}

struct MeshingOptions {
  double min_angle_deg = 20.0;
  /// Lattice points closer than this multiple of h to an input edge are dropped.
  double lattice_clearance = 0.6;
  std::size_t max_insertions = 2'000'000;
};

/// Builds a quality conforming Delaunay mesh of the channel whose edges
/// resolve every obstacle boundary. Interior points start from an equilateral
/// lattice of spacing h; boundary edges are split to length <= h; Ruppert-style
/// refinement then removes encroached segments, angles below the quality
/// floor and triangles with circumradius above h.
inline Mesh generate_mesh(const Geometry& geometry, double h_target,
                          const MeshingOptions& opts = {}) {
  if (!(h_target > 0.0)) throw MeshingError("h_target must be positive");
  validate_geometry(geometry);
  const double L = geometry.length, H = geometry.height;

  const auto input = detail::planar_graph(geometry);
  for (const auto& e : input) {
    if (distance(e.a, e.b) < 0.25 * h_target) {
      std::ostringstream os;
      os << "edge " << e.label << " has length " << distance(e.a, e.b)
         << " < h/4 = " << 0.25 * h_target << "; refine h_target";
      throw MeshingError(os.str());
    }
  }

  meshing::DelaunayTriangulation dt({0.0, 0.0}, {L, H});
  std::vector<detail::Segment> segments;

  for (const auto& e : input) {
    const double len = distance(e.a, e.b);
    const int k = std::max(1, static_cast<int>(std::ceil(len / h_target - 1e-9)));
    int prev = dt.insert(e.a);
    for (int i = 1; i <= k; ++i) {
      Point p = e.b;
      if (i < k) {
        const double s = static_cast<double>(i) / k;
        p = {e.a.x == e.b.x ? e.a.x : e.a.x + s * (e.b.x - e.a.x),
             e.a.y == e.b.y ? e.a.y : e.a.y + s * (e.b.y - e.a.y)};
      }
      const int cur = dt.insert(p);
      segments.push_back({prev, cur});
      prev = cur;
    }
  }

  // Equilateral seed lattice.
  const double dy = h_target * std::sqrt(3.0) / 2.0;
  const double clearance = opts.lattice_clearance * h_target;
  for (int j = 1; j * dy < H; ++j) {
    const double y = j * dy;
    const double x0 = (j % 2 == 1) ? 0.5 * h_target : 0.0;
    for (int i = 0; x0 + i * h_target < L; ++i) {
      const Point p{x0 + i * h_target, y};
      if (p.x <= 0.0) continue;
      bool clear = true;
      for (const auto& e : input) {
        if (detail::point_segment_distance(p, e.a, e.b) < clearance) {
          clear = false;
          break;
        }
      }
      if (clear) dt.insert(p);
    }
  }

  const double sin_floor = std::sin(opts.min_angle_deg * std::numbers::pi / 180.0);
  const auto& pts = dt.points();
  const auto pt = [&](int v) { return pts[static_cast<std::size_t>(v)]; };

  const auto encroaches = [&](Point p, const detail::Segment& s) {
    const Point a = pt(s.a), b = pt(s.b);
    const double dot = (a.x - p.x) * (b.x - p.x) + (a.y - p.y) * (b.y - p.y);
    const double len2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
    return dot < -1e-12 * len2;
  };
  const auto split = [&](std::size_t idx) {
    const auto s = segments[idx];
    const Point a = pt(s.a), b = pt(s.b);
    const Point mid{a.x == b.x ? a.x : 0.5 * (a.x + b.x), a.y == b.y ? a.y : 0.5 * (a.y + b.y)};
    const int m = dt.insert(mid);
    segments[idx] = {s.a, m};
    segments.push_back({m, s.b});
  };

  std::size_t insertions = 0;
  for (;;) {
    if (insertions > opts.max_insertions)
      throw MeshingError("mesh refinement did not terminate");

    // Segment recovery and encroachment.
    std::unordered_map<std::uint64_t, std::vector<int>> opposite;
    opposite.reserve(dt.triangles().size() * 2);
    for (const auto& tri : dt.triangles()) {
      if (!tri.alive) continue;
      for (int i = 0; i < 3; ++i)
        opposite[detail::edge_key(tri.v[static_cast<std::size_t>((i + 1) % 3)], tri.v[static_cast<std::size_t>((i + 2) % 3)])].push_back(tri.v[static_cast<std::size_t>(i)]);
    }
    std::vector<std::size_t> encroached;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      auto it = opposite.find(detail::edge_key(segments[s].a, segments[s].b));
      bool bad = (it == opposite.end());
      if (!bad) {
        for (int o : it->second)
          if (!meshing::DelaunayTriangulation::is_ghost(o) && encroaches(pt(o), segments[s])) bad = true;
      }
      if (bad) encroached.push_back(s);
    }
    if (!encroached.empty()) {
      for (auto s : encroached) split(s);
      insertions += encroached.size();
      continue;
    }

    // Quality and size refinement, lowest triangle index first.
    std::vector<int> bad;
    const auto& tris = dt.triangles();
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const auto& tri = tris[t];
      if (!tri.alive) continue;
      if (std::any_of(tri.v.begin(), tri.v.end(), meshing::DelaunayTriangulation::is_ghost)) continue;
      const Point a = pt(tri.v[0]), b = pt(tri.v[1]), c = pt(tri.v[2]);
      const double l0 = distance(b, c), l1 = distance(c, a), l2 = distance(a, b);
      const double area = 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
      const double R = l0 * l1 * l2 / (4.0 * area);
      if (std::min({l0, l1, l2}) / (2.0 * R) < sin_floor || R > h_target)
        bad.push_back(static_cast<int>(t));
    }
    if (bad.empty()) break;

    bool split_any = false;
    for (int t : bad) {
      const auto tri = dt.triangles()[static_cast<std::size_t>(t)];
      if (!tri.alive) continue;
      const Point c = detail::circumcenter(pt(tri.v[0]), pt(tri.v[1]), pt(tri.v[2]));
      std::vector<std::size_t> hit;
      for (std::size_t s = 0; s < segments.size(); ++s)
        if (encroaches(c, segments[s])) hit.push_back(s);
      if (!hit.empty()) {
        for (auto s : hit) split(s);
        insertions += hit.size();
        split_any = true;
        break;
      }
      if (c.x <= 0.0 || c.x >= L || c.y <= 0.0 || c.y >= H)
        throw MeshingError("circumcenter escaped the channel during refinement");
      dt.insert(c);
      ++insertions;
    }
    (void)split_any;
  }

  // Extract the mesh.
  Mesh mesh;
  mesh.h_target = h_target;
  const int ghost = meshing::DelaunayTriangulation::kGhostVertices;
  mesh.vertices.assign(pts.begin() + ghost, pts.end());
  for (const auto& tri : dt.triangles()) {
    if (!tri.alive) continue;
    if (std::any_of(tri.v.begin(), tri.v.end(), meshing::DelaunayTriangulation::is_ghost)) continue;
    mesh.triangles.push_back({tri.v[0] - ghost, tri.v[1] - ghost, tri.v[2] - ghost});
  }
  mesh.region.assign(mesh.triangles.size(), kFluidRegion);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const Point c = (1.0 / 3.0) * (mesh.vertices[static_cast<std::size_t>(tri[0])] +
                                   mesh.vertices[static_cast<std::size_t>(tri[1])] +
                                   mesh.vertices[static_cast<std::size_t>(tri[2])]);
    for (const auto& ob : geometry.obstacles) {
      if (point_in_polygon(c, ob.polygon)) {
        mesh.region[t] = ob.region_id;
        break;
      }
    }
  }

  const auto uses = detail::edge_uses(mesh);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const int a = tri[static_cast<std::size_t>(i)], b = tri[static_cast<std::size_t>((i + 1) % 3)];
      const auto& use = uses.at(detail::edge_key(a, b));
      const Point pa = mesh.vertices[static_cast<std::size_t>(a)], pb = mesh.vertices[static_cast<std::size_t>(b)];
      if (use.count == 1) {
        FacetTag tag = FacetTag::Wall;
        if (pa.x == 0.0 && pb.x == 0.0) tag = FacetTag::Inflow;
        else if (pa.x == L && pb.x == L) tag = FacetTag::Outflow;
        mesh.facets.push_back({a, b, tag});
      } else {
        const int other = use.tri[0] == static_cast<int>(t) ? use.tri[1] : use.tri[0];
        const int r_self = mesh.region[t];
        const int r_other = mesh.region[static_cast<std::size_t>(other)];
        if (r_self != r_other && r_self < r_other)
          mesh.facets.push_back({a, b, FacetTag::Interface});
      }
    }
  }
  validate_mesh(mesh);
  return mesh;
}

/// Red refinement: every triangle is split into four through its edge
/// midpoints. Regions and facet tags are inherited; h_target halves.
inline Mesh refine_uniform(const Mesh& m) {
  Mesh out;
  out.h_target = 0.5 * m.h_target;
  out.vertices = m.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  for (const auto& tri : m.triangles)
    for (int i = 0; i < 3; ++i) {
      int a = tri[static_cast<std::size_t>(i)], b = tri[static_cast<std::size_t>((i + 1) % 3)];
      midpoint.emplace(std::minmax(a, b), -1);
    }
  for (auto& [edge, id] : midpoint) {
    const Point pa = m.vertices[static_cast<std::size_t>(edge.first)];
    const Point pb = m.vertices[static_cast<std::size_t>(edge.second)];
    id = static_cast<int>(out.vertices.size());
    out.vertices.push_back({pa.x == pb.x ? pa.x : 0.5 * (pa.x + pb.x),
                            pa.y == pb.y ? pa.y : 0.5 * (pa.y + pb.y)});
  }
  const auto mid = [&](int a, int b) { return midpoint.at(std::minmax(a, b)); };
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto [v0, v1, v2] = m.triangles[t];
    const int m01 = mid(v0, v1), m12 = mid(v1, v2), m20 = mid(v2, v0);
    for (const auto& child : {std::array<int, 3>{v0, m01, m20}, std::array<int, 3>{m01, v1, m12},
                              std::array<int, 3>{m20, m12, v2}, std::array<int, 3>{m01, m12, m20}}) {
      out.triangles.push_back(child);
      out.region.push_back(m.region[t]);
    }
  }
  for (const auto& f : m.facets) {
    const int mm = mid(f.v0, f.v1);
    out.facets.push_back({f.v0, mm, f.tag});
    out.facets.push_back({mm, f.v1, f.tag});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fluid submesh

struct SubmeshMap {
  Mesh fluid;
  /// Submesh vertex index -> parent vertex index (strictly increasing).
  std::vector<int> vertex_map;
  /// Submesh triangle index -> parent triangle index.
  std::vector<int> triangle_map;
};

/// Keeps only fluid triangles; interface facets become no-slip walls.
inline SubmeshMap extract_fluid_submesh(const Mesh& mesh) {
  SubmeshMap sub;
  std::vector<int> new_index(mesh.vertices.size(), -1);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (mesh.is_solid(t)) continue;
    for (int v : mesh.triangles[t]) new_index[static_cast<std::size_t>(v)] = 0;
  }
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (new_index[v] < 0) continue;
    new_index[v] = static_cast<int>(sub.vertex_map.size());
    sub.vertex_map.push_back(static_cast<int>(v));
    sub.fluid.vertices.push_back(mesh.vertices[v]);
  }
  if (sub.vertex_map.empty()) throw InvalidInput("mesh has no fluid triangles");

  std::unordered_map<std::uint64_t, int> fluid_edges;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (mesh.is_solid(t)) continue;
    const auto& tri = mesh.triangles[t];
    sub.fluid.triangles.push_back({new_index[static_cast<std::size_t>(tri[0])],
                                   new_index[static_cast<std::size_t>(tri[1])],
                                   new_index[static_cast<std::size_t>(tri[2])]});
    sub.fluid.region.push_back(kFluidRegion);
    sub.triangle_map.push_back(static_cast<int>(t));
    for (int i = 0; i < 3; ++i) ++fluid_edges[detail::edge_key(tri[static_cast<std::size_t>(i)], tri[static_cast<std::size_t>((i + 1) % 3)])];
  }
  for (const auto& f : mesh.facets) {
    if (!fluid_edges.contains(detail::edge_key(f.v0, f.v1))) continue;
    const FacetTag tag = f.tag == FacetTag::Interface ? FacetTag::Wall : f.tag;
    sub.fluid.facets.push_back({new_index[static_cast<std::size_t>(f.v0)],
                                new_index[static_cast<std::size_t>(f.v1)], tag});
  }
  sub.fluid.h_target = mesh.h_target;
  return sub;
}

}  // namespace penalflow
