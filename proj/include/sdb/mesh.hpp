#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sdb/error.hpp"

namespace sdb {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Conforming triangulation of the unit square.
///
/// Triangles are stored counter-clockwise. `boundary_nodes` is sorted and
/// `on_boundary` gives constant-time membership for the same set.
struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<std::size_t> boundary_nodes;
  std::vector<bool> on_boundary;
  std::size_t n_side = 0;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return triangles.size(); }
};

/// Global numbering of the P1 (vertex) and P2 (vertex + edge midpoint)
/// spaces. P2 dofs are the vertex indices followed by the edge midpoints in
/// lexicographic (min vertex, max vertex) order.
struct DofMap {
  std::vector<std::array<std::size_t, 6>> p2_dofs;
  std::vector<std::array<std::size_t, 3>> p1_dofs;
  std::size_t n_p2 = 0;
  std::size_t n_p1 = 0;
  std::vector<std::size_t> p2_boundary;
  std::vector<bool> p2_on_boundary;
  std::vector<Point> midpoint_coords;      // indexed by (dof - n_p1)
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // same indexing

  /// Coordinates of any P2 dof.
  Point p2_coord(const Mesh& mesh, std::size_t dof) const {
    return dof < n_p1 ? mesh.nodes[dof] : midpoint_coords[dof - n_p1];
  }
};

/// Affine map x = x0 + J xi from the reference triangle (0,0),(1,0),(0,1).
struct ElementGeometry {
  std::array<std::array<double, 2>, 2> jacobian{};
  std::array<std::array<double, 2>, 2> inv_jacobian_t{};
  Point origin;
  double det = 0.0;
  double area = 0.0;
  double h_k = 0.0;

  Point map(double xi, double eta) const {
    return {origin.x + jacobian[0][0] * xi + jacobian[0][1] * eta,
            origin.y + jacobian[1][0] * xi + jacobian[1][1] * eta};
  }

  /// Physical gradient from a reference gradient.
  std::array<double, 2> grad(const std::array<double, 2>& g) const {
    return {inv_jacobian_t[0][0] * g[0] + inv_jacobian_t[0][1] * g[1],
            inv_jacobian_t[1][0] * g[0] + inv_jacobian_t[1][1] * g[1]};
  }

  /// Physical Hessian K H K^T with K = J^{-T}.
  std::array<std::array<double, 2>, 2> hessian(
      const std::array<std::array<double, 2>, 2>& h) const {
    const auto& k = inv_jacobian_t;
    std::array<std::array<double, 2>, 2> kh{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) kh[i][j] = k[i][0] * h[0][j] + k[i][1] * h[1][j];
    std::array<std::array<double, 2>, 2> out{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) out[i][j] = kh[i][0] * k[j][0] + kh[i][1] * k[j][1];
    return out;
  }
};

inline ElementGeometry element_geometry(const Point& a, const Point& b, const Point& c) {
  ElementGeometry g;
  g.origin = a;
  g.jacobian = {{{b.x - a.x, c.x - a.x}, {b.y - a.y, c.y - a.y}}};
  g.det = g.jacobian[0][0] * g.jacobian[1][1] - g.jacobian[0][1] * g.jacobian[1][0];
  const auto len = [](const Point& p, const Point& q) { return std::hypot(p.x - q.x, p.y - q.y); };
  g.h_k = std::max({len(a, b), len(b, c), len(c, a)});
  if (!(std::abs(g.det) > 1e-14 * g.h_k * g.h_k)) throw InputError("degenerate triangle: zero area");
  g.area = std::abs(g.det) / 2.0;
  const double inv = 1.0 / g.det;
  // J^{-1} = inv * [[j11, -j01], [-j10, j00]]; store its transpose.
  g.inv_jacobian_t = {{{g.jacobian[1][1] * inv, -g.jacobian[1][0] * inv},
                       {-g.jacobian[0][1] * inv, g.jacobian[0][0] * inv}}};
  return g;
}

inline ElementGeometry element_geometry(const Mesh& mesh, std::size_t k) {
  if (k >= mesh.triangles.size()) throw InputError("element id out of range");
  const auto& t = mesh.triangles[k];
  return element_geometry(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
}

/// Uniform (n_side+1)^2 grid; every cell is split along its
/// lower-left to upper-right diagonal.
inline Mesh build_structured_mesh(std::size_t n_side) {
  if (n_side == 0) throw InputError("n_side must be positive");
  Mesh m;
  m.n_side = n_side;
  const std::size_t n1 = n_side + 1;
  m.nodes.reserve(n1 * n1);
  m.on_boundary.assign(n1 * n1, false);
  for (std::size_t j = 0; j < n1; ++j) {
    for (std::size_t i = 0; i < n1; ++i) {
      m.nodes.push_back({static_cast<double>(i) / static_cast<double>(n_side),
                         static_cast<double>(j) / static_cast<double>(n_side)});
      if (i == 0 || j == 0 || i == n_side || j == n_side) {
        m.on_boundary[j * n1 + i] = true;
        m.boundary_nodes.push_back(j * n1 + i);
      }
    }
  }
  m.triangles.reserve(2 * n_side * n_side);
  for (std::size_t j = 0; j < n_side; ++j) {
    for (std::size_t i = 0; i < n_side; ++i) {
      const std::size_t a = j * n1 + i, b = a + 1, c = a + n1 + 1, d = a + n1;
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  }
  return m;
}

inline bool on_unit_square_side(const Point& p) {
  return p.x == 0.0 || p.x == 1.0 || p.y == 0.0 || p.y == 1.0;
}

inline DofMap build_dof_map(const Mesh& mesh) {
  DofMap dm;
  dm.n_p1 = mesh.num_nodes();
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_id;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      auto v0 = t[e], v1 = t[(e + 1) % 3];
      edge_id.emplace(std::minmax(v0, v1), 0);
    }
  std::size_t next = dm.n_p1;
  for (auto& [edge, id] : edge_id) {
    id = next++;
    dm.edges.push_back(edge);
    const auto& p = mesh.nodes[edge.first];
    const auto& q = mesh.nodes[edge.second];
    dm.midpoint_coords.push_back({0.5 * (p.x + q.x), 0.5 * (p.y + q.y)});
  }
  dm.n_p2 = next;

  dm.p1_dofs = mesh.triangles;
  dm.p2_dofs.reserve(mesh.num_elements());
  for (const auto& t : mesh.triangles) {
    std::array<std::size_t, 6> d{t[0], t[1], t[2], 0, 0, 0};
    for (int e = 0; e < 3; ++e) d[3 + e] = edge_id.at(std::minmax(t[e], t[(e + 1) % 3]));
    dm.p2_dofs.push_back(d);
  }

  dm.p2_on_boundary.assign(dm.n_p2, false);
  for (std::size_t v = 0; v < dm.n_p1; ++v) dm.p2_on_boundary[v] = mesh.on_boundary[v];
  for (std::size_t e = 0; e < dm.edges.size(); ++e)
    dm.p2_on_boundary[dm.n_p1 + e] =
        mesh.on_boundary[dm.edges[e].first] && mesh.on_boundary[dm.edges[e].second] &&
        on_unit_square_side(dm.midpoint_coords[e]);
  for (std::size_t i = 0; i < dm.n_p2; ++i)
    if (dm.p2_on_boundary[i]) dm.p2_boundary.push_back(i);
  return dm;
}

/// Plain-text dump: node count, "x y" lines, element count, "a b c" lines.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << mesh.num_nodes() << '\n';
  for (const auto& p : mesh.nodes) os << p.x << ' ' << p.y << '\n';
  os << mesh.num_elements() << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace sdb
