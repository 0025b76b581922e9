#pragma once

#include <algorithm>
#include <array>
#include <utility>
#include <vector>

#include "penalflow/errors.hpp"
#include "penalflow/mesh.hpp"

namespace penalflow {

/// Taylor-Hood P2-P1 degree-of-freedom maps.
///
/// P2 nodes are the mesh vertices (indices 0..V-1) followed by the edges in
/// sorted endpoint order (indices V..V+E-1). The global unknown vector is laid
/// out as [u_x(nodes), u_y(nodes), p(vertices)].
struct Spaces {
  int n_vertices = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::array<int, 6>> p2_nodes;  // per triangle: v0 v1 v2 e01 e12 e20
  std::vector<Point> node_coords;

  int n_nodes() const { return n_vertices + static_cast<int>(edges.size()); }
  int n_u() const { return 2 * n_nodes(); }
  int n_p() const { return n_vertices; }
  int n_total() const { return n_u() + n_p(); }

  int velocity_dof(int node, int comp) const { return comp * n_nodes() + node; }
  int pressure_dof(int vertex) const { return n_u() + vertex; }

  /// Node index of the edge (a, b); throws if it is not a mesh edge.
  int edge_node(int a, int b) const {
    const auto key = std::minmax(a, b);
    auto it = std::lower_bound(edges.begin(), edges.end(), std::pair<int, int>(key.first, key.second));
    if (it == edges.end() || *it != std::pair<int, int>(key.first, key.second))
      throw InvalidInput("edge (" + std::to_string(a) + "," + std::to_string(b) + ") is not in the mesh");
    return n_vertices + static_cast<int>(it - edges.begin());
  }

  /// Local-to-global map: 6 x-velocity, 6 y-velocity, then 3 pressure dofs.
  std::array<int, 15> element_dofs(std::size_t t, const Mesh& mesh) const {
    std::array<int, 15> d{};
    const auto& nodes = p2_nodes[t];
    for (std::size_t i = 0; i < 6; ++i) {
      d[i] = velocity_dof(nodes[i], 0);
      d[6 + i] = velocity_dof(nodes[i], 1);
    }
    for (std::size_t k = 0; k < 3; ++k) d[12 + k] = pressure_dof(mesh.triangles[t][k]);
    return d;
  }
};

inline Spaces build_spaces(const Mesh& mesh) {
  Spaces s;
  s.n_vertices = static_cast<int>(mesh.vertices.size());
  for (const auto& tri : mesh.triangles)
    for (std::size_t i = 0; i < 3; ++i) {
      const auto e = std::minmax(tri[i], tri[(i + 1) % 3]);
      s.edges.emplace_back(e.first, e.second);
    }
  std::sort(s.edges.begin(), s.edges.end());
  s.edges.erase(std::unique(s.edges.begin(), s.edges.end()), s.edges.end());

  s.node_coords = mesh.vertices;
  for (const auto& [a, b] : s.edges) {
    const Point pa = mesh.vertices[static_cast<std::size_t>(a)];
    const Point pb = mesh.vertices[static_cast<std::size_t>(b)];
    s.node_coords.push_back({pa.x == pb.x ? pa.x : 0.5 * (pa.x + pb.x),
                             pa.y == pb.y ? pa.y : 0.5 * (pa.y + pb.y)});
  }
  s.p2_nodes.reserve(mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    s.p2_nodes.push_back({tri[0], tri[1], tri[2], s.edge_node(tri[0], tri[1]),
                          s.edge_node(tri[1], tri[2]), s.edge_node(tri[2], tri[0])});
  }
  return s;
}

}  // namespace penalflow
