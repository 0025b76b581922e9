#pragma once

#include <algorithm>
#include <array>
#include <unordered_map>
#include <vector>

#include "penalflow/errors.hpp"
#include "penalflow/geometry.hpp"
#include "penalflow/predicates.hpp"

namespace penalflow::meshing {

/// Incremental Bowyer-Watson Delaunay triangulation. Vertices 0..2 belong to
/// an enclosing super-triangle; callers drop triangles touching them.
class DelaunayTriangulation {
 public:
  static constexpr int kGhostVertices = 3;

  struct Triangle {
    std::array<int, 3> v{};
    // nbr[i] is the triangle across the edge opposite v[i], or -1.
    std::array<int, 3> nbr{-1, -1, -1};
    bool alive = true;
  };

  DelaunayTriangulation(Point lo, Point hi) {
    const double cx = 0.5 * (lo.x + hi.x);
    const double cy = 0.5 * (lo.y + hi.y);
    const double s = std::max({hi.x - lo.x, hi.y - lo.y, 1.0});
    points_ = {{cx - 64.0 * s, cy - 64.0 * s}, {cx + 64.0 * s, cy - 64.0 * s},
               {cx, cy + 64.0 * s}};
    tris_.push_back(Triangle{{0, 1, 2}, {-1, -1, -1}, true});
    last_ = 0;
  }

  const std::vector<Point>& points() const { return points_; }
  const std::vector<Triangle>& triangles() const { return tris_; }
  static bool is_ghost(int v) { return v < kGhostVertices; }

  /// Triangle containing p (possibly on its boundary).
  int locate(Point p) const {
    int t = last_;
    const std::size_t max_steps = 4 * tris_.size() + 16;
    for (std::size_t step = 0; step < max_steps; ++step) {
      const Triangle& tri = tris_[static_cast<std::size_t>(t)];
      int next = -2;
      for (int i = 0; i < 3; ++i) {
        const Point& a = points_[static_cast<std::size_t>(tri.v[(i + 1) % 3])];
        const Point& b = points_[static_cast<std::size_t>(tri.v[(i + 2) % 3])];
        if (predicates::orient(a, b, p) < 0) {
          next = tri.nbr[i];
          break;
        }
      }
      if (next == -2) return t;
      if (next < 0) throw MeshingError("point outside the triangulation bounds");
      t = next;
    }
    // The visibility walk terminates on Delaunay triangulations; a linear scan
    // is kept as a guard against pathological input.
    for (std::size_t k = 0; k < tris_.size(); ++k) {
      const Triangle& tri = tris_[k];
      if (!tri.alive) continue;
      bool inside = true;
      for (int i = 0; i < 3 && inside; ++i)
        inside = predicates::orient(points_[static_cast<std::size_t>(tri.v[(i + 1) % 3])],
                                    points_[static_cast<std::size_t>(tri.v[(i + 2) % 3])], p) >= 0;
      if (inside) return static_cast<int>(k);
    }
    throw MeshingError("point location failed");
  }

  /// Inserts p and returns its vertex index. A point coinciding with an
  /// existing vertex returns that vertex unchanged.
  int insert(Point p) {
    const int t0 = locate(p);
    for (int v : tris_[static_cast<std::size_t>(t0)].v)
      if (points_[static_cast<std::size_t>(v)] == p) return v;

    const int pi = static_cast<int>(points_.size());
    points_.push_back(p);

    ++stamp_;
    mark_.resize(tris_.size(), 0);
    std::vector<int> cavity{t0};
    mark_[static_cast<std::size_t>(t0)] = stamp_;
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const Triangle& tri = tris_[static_cast<std::size_t>(cavity[k])];
      for (int n : tri.nbr) {
        if (n < 0 || mark_[static_cast<std::size_t>(n)] == stamp_) continue;
        const Triangle& nt = tris_[static_cast<std::size_t>(n)];
        if (predicates::incircle(points_[static_cast<std::size_t>(nt.v[0])],
                                 points_[static_cast<std::size_t>(nt.v[1])],
                                 points_[static_cast<std::size_t>(nt.v[2])], p) > 0) {
          mark_[static_cast<std::size_t>(n)] = stamp_;
          cavity.push_back(n);
        }
      }
    }

    struct BoundaryEdge {
      int a, b, outer, old;
    };
    std::vector<BoundaryEdge> boundary;
    for (int c : cavity) {
      const Triangle& tri = tris_[static_cast<std::size_t>(c)];
      for (int i = 0; i < 3; ++i) {
        const int n = tri.nbr[i];
        if (n >= 0 && mark_[static_cast<std::size_t>(n)] == stamp_) continue;
        boundary.push_back({tri.v[(i + 1) % 3], tri.v[(i + 2) % 3], n, c});
      }
    }

    for (int c : cavity) tris_[static_cast<std::size_t>(c)].alive = false;

    std::unordered_map<int, int> starts_at;
    std::unordered_map<int, int> ends_at;
    std::vector<int> created;
    created.reserve(boundary.size());
    for (const auto& e : boundary) {
      const int id = static_cast<int>(tris_.size());
      Triangle nt;
      nt.v = {e.a, e.b, pi};
      nt.nbr = {-1, -1, e.outer};
      tris_.push_back(nt);
      if (e.outer >= 0) {
        auto& outer = tris_[static_cast<std::size_t>(e.outer)];
        for (int& n : outer.nbr)
          if (n == e.old) n = id;
      }
      starts_at[e.a] = id;
      ends_at[e.b] = id;
      created.push_back(id);
    }
    for (int id : created) {
      Triangle& nt = tris_[static_cast<std::size_t>(id)];
      nt.nbr[0] = starts_at.at(nt.v[1]);  // across (b, p)
      nt.nbr[1] = ends_at.at(nt.v[0]);    // across (p, a)
    }
    last_ = created.front();
    return pi;
  }

 private:
  std::vector<Point> points_;
  std::vector<Triangle> tris_;
  std::vector<int> mark_;
  int stamp_ = 0;
  int last_ = 0;
};

}  // namespace penalflow::meshing
