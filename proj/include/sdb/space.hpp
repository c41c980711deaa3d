#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "sdb/error.hpp"
#include "sdb/fe_basis.hpp"
#include "sdb/mesh.hpp"
#include "sdb/problem.hpp"

namespace sdb {

/// Unknown ordering [u1 (P2) | u2 (P2) | p (P1) | c (P2)].
struct BlockLayout {
  std::size_t n_p2 = 0;
  std::size_t n_p1 = 0;

  std::size_t u1() const { return 0; }
  std::size_t u2() const { return n_p2; }
  std::size_t p() const { return 2 * n_p2; }
  std::size_t c() const { return 2 * n_p2 + n_p1; }
  std::size_t size() const { return 3 * n_p2 + n_p1; }

  const char* block_name(std::size_t global) const {
    if (global < u2()) return "u1";
    if (global < p()) return "u2";
    if (global < c()) return "p";
    return "c";
  }
};

/// Mesh, dof numbering and per-element geometry shared by assembly and
/// post-processing. Immutable once built.
struct Discretization {
  Mesh mesh;
  DofMap dofs;
  std::vector<ElementGeometry> geometry;
  BlockLayout layout;

  std::size_t num_elements() const { return mesh.num_elements(); }
  double h_max() const {
    double h = 0.0;
    for (const auto& g : geometry) h = std::max(h, g.h_k);
    return h;
  }
};

inline Discretization build_discretization(std::size_t n_side) {
  Discretization d;
  d.mesh = build_structured_mesh(n_side);
  d.dofs = build_dof_map(d.mesh);
  d.geometry.reserve(d.mesh.num_elements());
  for (std::size_t k = 0; k < d.mesh.num_elements(); ++k)
    d.geometry.push_back(element_geometry(d.mesh, k));
  d.layout = {d.dofs.n_p2, d.dofs.n_p1};
  return d;
}

/// One time level of (u1, u2, p, c).
struct CoupledState {
  Eigen::VectorXd u1, u2, p, c;
  double t = 0.0;

  static CoupledState zero(const BlockLayout& l, double t = 0.0) {
    CoupledState s;
    s.u1 = Eigen::VectorXd::Zero(l.n_p2);
    s.u2 = Eigen::VectorXd::Zero(l.n_p2);
    s.p = Eigen::VectorXd::Zero(l.n_p1);
    s.c = Eigen::VectorXd::Zero(l.n_p2);
    s.t = t;
    return s;
  }

  bool matches(const BlockLayout& l) const {
    return static_cast<std::size_t>(u1.size()) == l.n_p2 &&
           static_cast<std::size_t>(u2.size()) == l.n_p2 &&
           static_cast<std::size_t>(p.size()) == l.n_p1 &&
           static_cast<std::size_t>(c.size()) == l.n_p2;
  }

  Eigen::VectorXd pack(const BlockLayout& l) const {
    Eigen::VectorXd x(l.size());
    x << u1, u2, p, c;
    return x;
  }

  static CoupledState unpack(const BlockLayout& l, const Eigen::VectorXd& x, double t) {
    if (static_cast<std::size_t>(x.size()) != l.size()) throw InputError("vector size mismatch");
    CoupledState s;
    const auto n2 = static_cast<Eigen::Index>(l.n_p2), n1 = static_cast<Eigen::Index>(l.n_p1);
    s.u1 = x.segment(0, n2);
    s.u2 = x.segment(n2, n2);
    s.p = x.segment(2 * n2, n1);
    s.c = x.segment(2 * n2 + n1, n2);
    s.t = t;
    return s;
  }

  /// a * lhs + b * rhs, field by field.
  static CoupledState blend(double a, const CoupledState& lhs, double b, const CoupledState& rhs,
                            double t) {
    CoupledState s;
    s.u1 = a * lhs.u1 + b * rhs.u1;
    s.u2 = a * lhs.u2 + b * rhs.u2;
    s.p = a * lhs.p + b * rhs.p;
    s.c = a * lhs.c + b * rhs.c;
    s.t = t;
    return s;
  }
};

/// Nodal interpolant of the manufactured solution at time t.
inline CoupledState interpolate_exact(const Discretization& d, double t) {
  auto s = CoupledState::zero(d.layout, t);
  for (std::size_t i = 0; i < d.dofs.n_p2; ++i) {
    const auto x = d.dofs.p2_coord(d.mesh, i);
    const auto f = exact_solution(x.x, x.y, t);
    s.u1[i] = d.dofs.p2_on_boundary[i] ? 0.0 : f.u1.v;
    s.u2[i] = d.dofs.p2_on_boundary[i] ? 0.0 : f.u2.v;
    s.c[i] = d.dofs.p2_on_boundary[i] ? 0.0 : f.c.v;
  }
  for (std::size_t i = 0; i < d.dofs.n_p1; ++i) {
    const auto& x = d.mesh.nodes[i];
    s.p[i] = exact_solution(x.x, x.y, t).p.v;
  }
  return s;
}

/// Shape functions of one element mapped to physical coordinates at a
/// reference point. Hessians of P2 are constant per element.
struct PhysicalShape {
  std::array<double, 6> n{};
  std::array<Vec2, 6> g{};
  std::array<Mat2, 6> h{};
  std::array<double, 3> np{};
  std::array<Vec2, 3> gp{};
};

inline PhysicalShape physical_shape(const ElementGeometry& geo, double xi, double eta) {
  PhysicalShape s;
  const auto p2 = p2_shape(xi, eta);
  const auto p1 = p1_shape(xi, eta);
  for (int i = 0; i < 6; ++i) {
    s.n[i] = p2.values[i];
    s.g[i] = geo.grad(p2.grads[i]);
    s.h[i] = geo.hessian(p2.hessians[i]);
  }
  for (int i = 0; i < 3; ++i) {
    s.np[i] = p1.values[i];
    s.gp[i] = geo.grad(p1.grads[i]);
  }
  return s;
}

/// Value, gradient and second derivatives of a P2 field at one point.
struct P2Value {
  double v = 0.0;
  Vec2 g{};
  double dxx = 0.0;
  double dyy = 0.0;
};

inline P2Value eval_p2(const PhysicalShape& s, const Eigen::VectorXd& field,
                       const std::array<std::size_t, 6>& dofs) {
  P2Value out;
  for (int i = 0; i < 6; ++i) {
    const double a = field[static_cast<Eigen::Index>(dofs[i])];
    out.v += a * s.n[i];
    out.g[0] += a * s.g[i][0];
    out.g[1] += a * s.g[i][1];
    out.dxx += a * s.h[i][0][0];
    out.dyy += a * s.h[i][1][1];
  }
  return out;
}

inline P2Value eval_p1(const PhysicalShape& s, const Eigen::VectorXd& field,
                       const std::array<std::size_t, 3>& dofs) {
  P2Value out;
  for (int i = 0; i < 3; ++i) {
    const double a = field[static_cast<Eigen::Index>(dofs[i])];
    out.v += a * s.np[i];
    out.g[0] += a * s.gp[i][0];
    out.g[1] += a * s.gp[i][1];
  }
  return out;
}

}  // namespace sdb
