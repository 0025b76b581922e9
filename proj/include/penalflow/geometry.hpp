#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "penalflow/errors.hpp"

namespace penalflow {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Channel test cases.
enum class CaseId { BoxWall, SharpCorner, TwoObstacles, NoObstacle };

inline std::string_view case_name(CaseId id) {
  switch (id) {
    case CaseId::BoxWall: return "box_wall";
    case CaseId::SharpCorner: return "sharp_corner";
    case CaseId::TwoObstacles: return "two_obstacles";
    case CaseId::NoObstacle: return "no_obstacle";
  }
  throw ConfigError("unknown case id " + std::to_string(static_cast<int>(id)));
}

inline CaseId parse_case(std::string_view name) {
  for (auto id : {CaseId::BoxWall, CaseId::SharpCorner, CaseId::TwoObstacles,
                  CaseId::NoObstacle}) {
    if (case_name(id) == name) return id;
  }
  throw ConfigError("unknown case '" + std::string(name) +
                    "' (expected box_wall, sharp_corner, two_obstacles or no_obstacle)");
}

/// A solid obstacle: closed, counterclockwise polygon. Region ids start at 1;
/// region 0 is the fluid.
struct Obstacle {
  int region_id = 1;
  std::vector<Point> polygon;
};

struct Geometry {
  double length = 4.0;
  double height = 2.0;
  std::vector<Obstacle> obstacles;
  CaseId case_id = CaseId::NoObstacle;
};

// ---------------------------------------------------------------------------
// Polygon helpers

inline double polygon_signed_area(std::span<const Point> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

/// Even-odd point-in-polygon test. Points on the boundary give an arbitrary
/// but deterministic answer; callers only query element centroids.
inline bool point_in_polygon(Point p, std::span<const Point> poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

namespace detail {

inline double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

inline bool segments_intersect(Point a, Point b, Point c, Point d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(c, d, a)) return true;
  if (d2 == 0 && on_segment(c, d, b)) return true;
  if (d3 == 0 && on_segment(a, b, c)) return true;
  if (d4 == 0 && on_segment(a, b, d)) return true;
  return false;
}

}  // namespace detail

/// True when no two non-adjacent edges of the polygon touch.
inline bool polygon_is_simple(std::span<const Point> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (detail::segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]))
        return false;
    }
  }
  return true;
}

/// Checks the geometry invariants; throws ConfigError on violation.
inline void validate_geometry(const Geometry& g) {
  if (!(g.length > 0.0) || !(g.height > 0.0))
    throw ConfigError("channel dimensions must be positive");
  for (const auto& ob : g.obstacles) {
    if (ob.region_id < 1) throw ConfigError("obstacle region ids must be >= 1");
    if (!polygon_is_simple(ob.polygon))
      throw ConfigError("obstacle " + std::to_string(ob.region_id) + " is not a simple polygon");
    if (polygon_signed_area(ob.polygon) <= 0.0)
      throw ConfigError("obstacle " + std::to_string(ob.region_id) +
                        " must be oriented counterclockwise");
    for (const auto& p : ob.polygon) {
      if (p.x < 0.0 || p.x > g.length || p.y < 0.0 || p.y > g.height)
        throw ConfigError("obstacle " + std::to_string(ob.region_id) +
                          " leaves the channel");
    }
  }
  for (std::size_t a = 0; a < g.obstacles.size(); ++a) {
    for (std::size_t b = a + 1; b < g.obstacles.size(); ++b) {
      const auto& pa = g.obstacles[a].polygon;
      const auto& pb = g.obstacles[b].polygon;
      for (std::size_t i = 0; i < pa.size(); ++i)
        for (std::size_t j = 0; j < pb.size(); ++j)
          if (detail::segments_intersect(pa[i], pa[(i + 1) % pa.size()], pb[j],
                                         pb[(j + 1) % pb.size()]))
            throw ConfigError("obstacles " + std::to_string(g.obstacles[a].region_id) +
                              " and " + std::to_string(g.obstacles[b].region_id) + " overlap");
      if (point_in_polygon(pa.front(), pb) || point_in_polygon(pb.front(), pa))
        throw ConfigError("obstacles overlap");
    }
  }
}

// ---------------------------------------------------------------------------
// Test-case cookbook

/// Box constriction attached to the bottom wall.
inline std::vector<Point> box_wall_polygon() {
  return {{0.9, 0.0}, {1.1, 0.0}, {1.1, 0.6}, {0.9, 0.6}};
}

/// Stepped tower on the bottom wall: base [1.4,1.6] x {0}, four flared tiers
/// per side (8 reflex corners, acute flare tips of ~72-79 degrees) and a spire
/// with apex (1.5, 1.2). All interior and exterior angles are >= 60 degrees.
inline std::vector<Point> sharp_corner_polygon() {
  const std::vector<Point> right = {
      {1.60, 0.00}, {1.60, 0.30}, {1.55, 0.30}, {1.64, 0.55}, {1.56, 0.55},
      {1.62, 0.80}, {1.56, 0.80}, {1.60, 1.00}, {1.56, 1.00}, {1.56, 1.10},
  };
  std::vector<Point> poly = right;
  poly.push_back({1.50, 1.20});
  for (auto it = right.rbegin(); it != right.rend(); ++it) poly.push_back({3.0 - it->x, it->y});
  return poly;
}

/// Regular polygon inscribed in the disk (x-3)^2 + (y-1.5)^2 = 0.3^2.
inline std::vector<Point> immersed_disk_polygon(int segments) {
  std::vector<Point> poly;
  poly.reserve(static_cast<std::size_t>(segments));
  for (int k = 0; k < segments; ++k) {
    const double t = 2.0 * std::numbers::pi * k / segments;
    poly.push_back({3.0 + 0.3 * std::cos(t), 1.5 + 0.3 * std::sin(t)});
  }
  return poly;
}

inline Geometry make_geometry(CaseId id, int circle_segments = 64) {
  Geometry g;
  g.case_id = id;
  switch (id) {
    case CaseId::BoxWall:
      g.obstacles.push_back({1, box_wall_polygon()});
      break;
    case CaseId::SharpCorner:
      g.obstacles.push_back({1, sharp_corner_polygon()});
      break;
    case CaseId::TwoObstacles:
      if (circle_segments < 12)
        throw ConfigError("two_obstacles needs circle_segments >= 12, got " +
                          std::to_string(circle_segments));
      g.obstacles.push_back({1, box_wall_polygon()});
      g.obstacles.push_back({2, immersed_disk_polygon(circle_segments)});
      break;
    case CaseId::NoObstacle:
      break;
    default:
      throw ConfigError("unknown case id " + std::to_string(static_cast<int>(id)));
  }
  validate_geometry(g);
  return g;
}

/// True when the obstacle shares a boundary portion of positive length with
/// the channel walls.
inline bool touches_channel_boundary(const Geometry& g, const Obstacle& ob) {
  const auto on_wall = [&](Point a, Point b) {
    return (a.y == 0.0 && b.y == 0.0) || (a.y == g.height && b.y == g.height) ||
           (a.x == 0.0 && b.x == 0.0) || (a.x == g.length && b.x == g.length);
  };
  for (std::size_t i = 0; i < ob.polygon.size(); ++i)
    if (on_wall(ob.polygon[i], ob.polygon[(i + 1) % ob.polygon.size()])) return true;
  return false;
}

}  // namespace penalflow
