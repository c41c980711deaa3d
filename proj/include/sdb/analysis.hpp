#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "sdb/assembly.hpp"
#include "sdb/error.hpp"
#include "sdb/fe_basis.hpp"
#include "sdb/problem.hpp"
#include "sdb/space.hpp"
#include "sdb/stabilization.hpp"

namespace sdb {

struct NormPair {
  double l2 = 0.0;
  double h1 = 0.0;  // full H1 norm, sqrt(L2^2 + |grad|^2)
};

struct FieldErrors {
  NormPair u1, u2, p, c;
};

/// Squared integrals behind FieldErrors, kept for time accumulation.
struct FieldErrorsSq {
  double u1_l2 = 0, u1_grad = 0, u2_l2 = 0, u2_grad = 0, p_l2 = 0, p_grad = 0, c_l2 = 0,
         c_grad = 0;

  FieldErrors norms() const {
    const auto pair = [](double l2, double grad) {
      return NormPair{std::sqrt(l2), std::sqrt(l2 + grad)};
    };
    return {pair(u1_l2, u1_grad), pair(u2_l2, u2_grad), pair(p_l2, p_grad), pair(c_l2, c_grad)};
  }
};

using ExactFn = std::function<ExactFields(double x, double y)>;

inline FieldErrorsSq field_error_integrals(const Discretization& d, const CoupledState& s,
                                           const ExactFn& exact, int degree = 7) {
  if (!s.matches(d.layout)) throw InputError("state does not match the dof map");
  const auto rule = quadrature_rule(degree);
  FieldErrorsSq e;
  for (std::size_t k = 0; k < d.num_elements(); ++k) {
    const auto& geo = d.geometry[k];
    const auto& p2 = d.dofs.p2_dofs[k];
    const auto& p1 = d.dofs.p1_dofs[k];
    for (const auto& qp : rule.points) {
      const auto sh = physical_shape(geo, qp.x, qp.y);
      const double w = qp.weight * std::abs(geo.det);
      const auto x = geo.map(qp.x, qp.y);
      const auto f = exact(x.x, x.y);
      const auto acc = [&](const P2Value& h, const FieldJet& ex, double& l2, double& grad) {
        const double dv = ex.v - h.v, dx = ex.dx - h.g[0], dy = ex.dy - h.g[1];
        l2 += w * dv * dv;
        grad += w * (dx * dx + dy * dy);
      };
      acc(eval_p2(sh, s.u1, p2), f.u1, e.u1_l2, e.u1_grad);
      acc(eval_p2(sh, s.u2, p2), f.u2, e.u2_l2, e.u2_grad);
      acc(eval_p1(sh, s.p, p1), f.p, e.p_l2, e.p_grad);
      acc(eval_p2(sh, s.c, p2), f.c, e.c_l2, e.c_grad);
    }
  }
  return e;
}

/// L2 and H1 errors against the manufactured solution at time t.
inline FieldErrors field_error_norms(const Discretization& d, const CoupledState& s, double t,
                                     int degree = 7) {
  return field_error_integrals(d, s, [t](double x, double y) { return exact_solution(x, y, t); },
                               degree)
      .norms();
}

/// Per-step squared norms of one error field.
///
/// level_l2_sq[n] = ||f^n||^2 for n = 0..N; theta_l2_sq[n] and theta_h1_sq[n]
/// are ||f^{n,theta}||^2 and its full H1 counterpart for n = 0..N-1.
struct ErrorSeries {
  std::vector<double> level_l2_sq;
  std::vector<double> theta_l2_sq;
  std::vector<double> theta_h1_sq;
};

struct TimeNorms {
  double l2h1 = 0.0;
  double v = 0.0;
  double q = 0.0;
};

inline TimeNorms time_series_norms(const ErrorSeries& s, double dt) {
  if (s.level_l2_sq.empty()) throw InputError("empty error series");
  if (s.theta_l2_sq.size() != s.theta_h1_sq.size() ||
      s.theta_l2_sq.size() + 1 != s.level_l2_sq.size())
    throw InputError("error series must hold N+1 levels and N theta points");
  double h1 = 0.0, l2 = 0.0;
  for (std::size_t n = 0; n < s.theta_h1_sq.size(); ++n) {
    h1 += s.theta_h1_sq[n] * dt;
    l2 += s.theta_l2_sq[n] * dt;
  }
  const double vmax = *std::max_element(s.level_l2_sq.begin(), s.level_l2_sq.end());
  return {std::sqrt(h1), std::sqrt(vmax + h1), std::sqrt(l2)};
}

/// order_i = ln(e_{i-1}/e_i) / ln(h_{i-1}/h_i); one entry per consecutive pair.
inline std::vector<double> convergence_order(const std::vector<double>& errors,
                                             const std::vector<double>& h) {
  if (errors.size() != h.size() || errors.size() < 2)
    throw InputError("convergence_order needs two equally long lists of length >= 2");
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] > 0.0)) throw InputError("errors must be positive");
    if (!(h[i] > 0.0) || (i > 0 && !(h[i] < h[i - 1])))
      throw InputError("h must be positive and strictly decreasing");
  }
  std::vector<double> out;
  for (std::size_t i = 1; i < errors.size(); ++i)
    out.push_back(std::log(errors[i - 1] / errors[i]) / std::log(h[i - 1] / h[i]));
  return out;
}

/// Least-squares slope of log(e) against log(h).
inline double loglog_slope(const std::vector<double>& errors, const std::vector<double>& h) {
  if (errors.size() != h.size() || errors.size() < 2) throw InputError("need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double x = std::log(h[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Element-wise strong residual norms and the combined estimator
///   eta^2 = sum_k sum_i (h_k^2 / eps1 + C_i^2 / eps2) ||R_i||_k^2
/// with C = (tau1', tau1', tau2', tau3 + 2 (d_factor - 1)) under ASGS and
/// C = 0 under Galerkin.
struct ResidualIndicator {
  std::vector<std::array<double, 4>> element;  // ||R1||, ||R2||, ||R3||, ||R4|| per element
  std::vector<double> h;
  std::array<double, 4> tau_weights{};
  double eps1 = 1.0;
  double eps2 = 1.0;
  double global = 0.0;

  double element_eta_sq(std::size_t k) const {
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
      s += (h[k] * h[k] / eps1 + tau_weights[i] * tau_weights[i] / eps2) * element[k][i] *
           element[k][i];
    return s;
  }
};

struct EstimatorInput {
  const CoupledState* state_n = nullptr;
  const CoupledState* state_np1 = nullptr;
  CoefficientSet coeffs;
  ForcingFn forcing;
  double dt = 0.0;
  double theta = 1.0;
  const StabilizationParams* taus = nullptr;  // null for Galerkin weights
  int degree = 7;
};

/// Residuals are evaluated at the theta point from U^{n,theta} with the
/// transport residual including (c^{n+1} - c^n)/dt.
inline ResidualIndicator aposteriori_estimator(const Discretization& d, const EstimatorInput& in) {
  if (!in.state_n || !in.state_np1) throw InputError("estimator needs two states");
  if (!in.state_n->matches(d.layout) || !in.state_np1->matches(d.layout))
    throw InputError("state does not match the dof map");
  if (!(in.dt > 0.0)) throw InputError("dt must be positive");
  const double a = 0.5 * (1.0 + in.theta), b = 0.5 * (1.0 - in.theta);
  const double t = in.state_n->t + a * in.dt;
  const auto mid = CoupledState::blend(a, *in.state_np1, b, *in.state_n, t);
  const auto rule = quadrature_rule(in.degree);

  ResidualIndicator out;
  if (in.taus) {
    const auto& s = *in.taus;
    out.tau_weights = {s.tau1_p, s.tau1_p, s.tau2_p, s.tau3 + 2.0 * (s.d_factor - 1.0)};
  }
  out.element.resize(d.num_elements());
  out.h.resize(d.num_elements());
  const auto& kc = in.coeffs;
  double total = 0.0;
  for (std::size_t k = 0; k < d.num_elements(); ++k) {
    const auto& geo = d.geometry[k];
    const auto& p2 = d.dofs.p2_dofs[k];
    const auto& p1 = d.dofs.p1_dofs[k];
    std::array<double, 4> sq{};
    for (const auto& qp : rule.points) {
      const auto sh = physical_shape(geo, qp.x, qp.y);
      const double w = qp.weight * std::abs(geo.det);
      const auto x = geo.map(qp.x, qp.y);
      const auto u1 = eval_p2(sh, mid.u1, p2);
      const auto u2 = eval_p2(sh, mid.u2, p2);
      const auto p = eval_p1(sh, mid.p, p1);
      const auto c = eval_p2(sh, mid.c, p2);
      const double c_new = eval_p2(sh, in.state_np1->c, p2).v;
      const double c_old = eval_p2(sh, in.state_n->c, p2).v;
      const double mu = kc.mu(c.v), dmu = kc.mu.derivative(c.v);
      const double mux = dmu * c.g[0], muy = dmu * c.g[1];
      const auto D = kc.diff(x.x, x.y, t);
      const auto f = in.forcing(x.x, x.y, t);
      const auto visc = [&](const P2Value& u) {
        return -mu * (u.dxx + u.dyy) - (mux * u.g[0] + muy * u.g[1]);
      };
      const double r1 = f.f1x - (visc(u1) + kc.sigma * u1.v + p.g[0]);
      const double r2 = f.f1y - (visc(u2) + kc.sigma * u2.v + p.g[1]);
      const double r3 = f.f2 - (u1.g[0] + u2.g[1]);
      const double div_flux = D.d1 * c.dxx + D.d1_dx * c.g[0] + D.d2 * c.dyy + D.d2_dy * c.g[1];
      const double r4 = f.g - ((c_new - c_old) / in.dt - div_flux + u1.v * c.g[0] +
                               u2.v * c.g[1] + kc.alpha * c.v);
      sq[0] += w * r1 * r1;
      sq[1] += w * r2 * r2;
      sq[2] += w * r3 * r3;
      sq[3] += w * r4 * r4;
    }
    for (int i = 0; i < 4; ++i) out.element[k][i] = std::sqrt(sq[i]);
    out.h[k] = geo.h_k;
    total += out.element_eta_sq(k);
  }
  out.global = std::sqrt(total);
  return out;
}

}  // namespace sdb
