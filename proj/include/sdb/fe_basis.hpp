#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sdb/error.hpp"

namespace sdb {

using Vec2 = std::array<double, 2>;
using Mat2 = std::array<std::array<double, 2>, 2>;

/// Values and reference derivatives of an N-function Lagrange basis.
template <std::size_t N>
struct ShapeEval {
  std::array<double, N> values{};
  std::array<Vec2, N> grads{};
  std::array<Mat2, N> hessians{};  // zero for P1
};

/// Linear basis on the reference triangle; values are the barycentric
/// coordinates (1 - x - y, x, y).
inline ShapeEval<3> p1_shape(double x, double y) {
  ShapeEval<3> s;
  s.values = {1.0 - x - y, x, y};
  s.grads = {Vec2{-1.0, -1.0}, Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  return s;
}

/// Quadratic basis: vertices 0,1,2 then the midpoints of edges (0,1), (1,2),
/// (2,0).
inline ShapeEval<6> p2_shape(double x, double y) {
  const std::array<double, 3> l{1.0 - x - y, x, y};
  const std::array<Vec2, 3> dl{Vec2{-1.0, -1.0}, Vec2{1.0, 0.0}, Vec2{0.0, 1.0}};
  ShapeEval<6> s;
  for (int i = 0; i < 3; ++i) {
    s.values[i] = l[i] * (2.0 * l[i] - 1.0);
    for (int a = 0; a < 2; ++a) {
      s.grads[i][a] = (4.0 * l[i] - 1.0) * dl[i][a];
      for (int b = 0; b < 2; ++b) s.hessians[i][a][b] = 4.0 * dl[i][a] * dl[i][b];
    }
  }
  constexpr int edge[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int e = 0; e < 3; ++e) {
    const int p = edge[e][0], q = edge[e][1];
    s.values[3 + e] = 4.0 * l[p] * l[q];
    for (int a = 0; a < 2; ++a) {
      s.grads[3 + e][a] = 4.0 * (l[q] * dl[p][a] + l[p] * dl[q][a]);
      for (int b = 0; b < 2; ++b)
        s.hessians[3 + e][a][b] = 4.0 * (dl[p][a] * dl[q][b] + dl[q][a] * dl[p][b]);
    }
  }
  return s;
}

/// Reference coordinates of the six P2 nodes, in basis order.
inline constexpr std::array<Vec2, 6> p2_nodes{Vec2{0.0, 0.0}, Vec2{1.0, 0.0}, Vec2{0.0, 1.0},
                                              Vec2{0.5, 0.0}, Vec2{0.5, 0.5}, Vec2{0.0, 0.5}};

struct QuadPoint {
  double x;
  double y;
  double weight;
};

/// Rule on the reference triangle; weights sum to 1/2.
struct QuadratureRule {
  int degree = 0;
  std::vector<QuadPoint> points;
};

namespace detail {

// Fully symmetric orbits, weights normalized to unit area.
inline void add_centroid(QuadratureRule& r, double w) {
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 0.5 * w});
}

inline void add_orbit3(QuadratureRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.points.push_back({a, a, 0.5 * w});
  r.points.push_back({b, a, 0.5 * w});
  r.points.push_back({a, b, 0.5 * w});
}

inline void add_orbit6(QuadratureRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  for (const auto& [x, y] : {std::pair{a, b}, {b, a}, {a, c}, {c, a}, {b, c}, {c, b}})
    r.points.push_back({x, y, 0.5 * w});
}

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration.
inline void gauss_legendre01(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Collapsed (Duffy) tensor rule: exact for total degree 2n-2.
inline QuadratureRule collapsed_rule(int n, int degree) {
  std::vector<double> x, w;
  gauss_legendre01(n, x, w);
  QuadratureRule r;
  r.degree = degree;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      r.points.push_back({x[i], x[j] * (1.0 - x[i]), w[i] * w[j] * (1.0 - x[i])});
  return r;
}

}  // namespace detail

/// Symmetric rules up to degree 6; degree 7 uses a 25-point collapsed
/// Gauss-Legendre product rule. All weights are positive.
inline QuadratureRule quadrature_rule(int degree) {
  QuadratureRule r;
  r.degree = degree;
  switch (degree) {
    case 1:
      detail::add_centroid(r, 1.0);
      break;
    case 2:
      detail::add_orbit3(r, 1.0 / 6.0, 1.0 / 3.0);
      break;
    case 3:
    case 4:
      detail::add_orbit3(r, 0.445948490915965, 0.223381589678011);
      detail::add_orbit3(r, 0.091576213509771, 0.109951743655322);
      break;
    case 5: {
      const double s = std::sqrt(15.0);
      detail::add_centroid(r, 9.0 / 40.0);
      detail::add_orbit3(r, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
      detail::add_orbit3(r, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
      break;
    }
    case 6:
      detail::add_orbit3(r, 0.249286745170910, 0.116786275726379);
      detail::add_orbit3(r, 0.063089014491502, 0.050844906370207);
      detail::add_orbit6(r, 0.053145049844817, 0.310352451033784, 0.082851075618374);
      break;
    case 7:
      return detail::collapsed_rule(5, 7);
    default:
      throw InputError("unsupported quadrature degree " + std::to_string(degree));
  }
  return r;
}

}  // namespace sdb
