#pragma once

#include <random>

#include "penalflow/penalflow.hpp"

namespace pftest {

using namespace penalflow;

// Reference triangle (0,0),(1,0),(0,1), all edges walls.
inline Mesh one_triangle() {
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  m.region = {0};
  m.facets = {{0, 1, FacetTag::Wall}, {1, 2, FacetTag::Wall}, {2, 0, FacetTag::Wall}};
  return m;
}

// Unit square split along the diagonal (1,0)-(0,1).
inline Mesh two_triangles() {
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  m.triangles = {{0, 1, 2}, {1, 3, 2}};
  m.region = {0, 0};
  m.facets = {{0, 1, FacetTag::Wall}, {1, 3, FacetTag::Wall}, {3, 2, FacetTag::Wall}, {2, 0, FacetTag::Wall}};
  return m;
}

inline const Mesh& coarse_channel() {
  static const Mesh m = generate_mesh(make_geometry(CaseId::NoObstacle), 0.5);
  return m;
}

inline const Mesh& coarse_box_wall() {
  static const Mesh m = generate_mesh(make_geometry(CaseId::BoxWall), 0.25);
  return m;
}

inline const Mesh& box_wall_mesh() {
  static const Mesh m = generate_mesh(make_geometry(CaseId::BoxWall), 0.05);
  return m;
}

inline double poiseuille_u(Point x) { return 100.0 * x.y * (2.0 - x.y); }
inline double poiseuille_p(Point x) { return 200.0 * (4.0 - x.x); }

inline Eigen::VectorXd random_vector(Eigen::Index n, unsigned seed, double scale = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(gen);
  return v;
}

inline double area(const Mesh& m, bool solid_only = false) {
  double a = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    if (!solid_only || m.is_solid(t)) a += triangle_area(m, t);
  return a;
}

}  // namespace pftest
