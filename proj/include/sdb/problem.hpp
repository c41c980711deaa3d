#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "sdb/error.hpp"

namespace sdb {

/// Value and derivatives of a scalar field at one (x, y, t).
struct FieldJet {
  double v = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dxx = 0.0;
  double dyy = 0.0;
  double dxy = 0.0;
  double dt = 0.0;
};

struct ExactFields {
  FieldJet u1, u2, p, c;
};

enum class DiffusionCase { nonzero, zero };

inline DiffusionCase parse_diffusion_case(const std::string& s) {
  if (s == "nonzero_diff" || s == "nonzero") return DiffusionCase::nonzero;
  if (s == "zero_diff" || s == "zero") return DiffusionCase::zero;
  throw ConfigError("unknown case '" + s + "' (expected nonzero_diff or zero_diff)");
}

inline std::string to_string(DiffusionCase c) {
  return c == DiffusionCase::nonzero ? "nonzero_diff" : "zero_diff";
}

/// Concentration-dependent viscosity mu(c) = prefactor * exp(rate * c).
struct ViscosityLaw {
  double prefactor = 0.954;
  double rate = 27.93 * 0.028;

  double operator()(double c) const { return prefactor * std::exp(rate * c); }
  double derivative(double c) const { return rate * (*this)(c); }
};

inline double viscosity(double c) { return ViscosityLaw{}(c); }

/// Diffusion coefficients and the derivatives needed by the strong operator
/// d/dx(D1 dc/dx) + d/dy(D2 dc/dy).
struct Diffusion {
  double d1 = 0.0;
  double d2 = 0.0;
  double d1_dx = 0.0;
  double d2_dy = 0.0;
};

inline Diffusion diffusion_jet(DiffusionCase dc, double x, double y, double t) {
  if (dc == DiffusionCase::zero) return {};
  constexpr double pi = std::numbers::pi;
  const double sx = std::sin(pi * x), cx = std::cos(pi * x);
  const double sy = std::sin(pi * y), cy = std::cos(pi * y);
  const double s2x = std::sin(2 * pi * x), s2y = std::sin(2 * pi * y);
  const double t2 = t * t;
  Diffusion d;
  d.d1 = t2 * sx * sx * sx * sx * s2y * s2y;
  d.d2 = t2 * s2x * s2x * sy * sy * sy * sy;
  d.d1_dx = t2 * 4.0 * pi * sx * sx * sx * cx * s2y * s2y;
  d.d2_dy = t2 * s2x * s2x * 4.0 * pi * sy * sy * sy * cy;
  return d;
}

/// (D1, D2) only.
inline std::pair<double, double> diffusion_case(DiffusionCase dc, double x, double y, double t) {
  const auto d = diffusion_jet(dc, x, y, t);
  return {d.d1, d.d2};
}

/// Coefficients of the coupled flow/transport problem.
///
/// `mu_l` and `mu_u` bound mu(c) over the concentration range of the
/// manufactured solution, c in [0, 1/16]. `mu_stab` is the viscosity value
/// entering the stabilization parameters, mu(1/16).
struct CoefficientSet {
  ViscosityLaw mu;
  double sigma = 1.0;
  double alpha = 0.01;
  DiffusionCase diffusion = DiffusionCase::nonzero;
  double mu_l = ViscosityLaw{}(0.0);
  double mu_u = ViscosityLaw{}(0.0625);
  double mu_stab = ViscosityLaw{}(0.0625);

  Diffusion diff(double x, double y, double t) const { return diffusion_jet(diffusion, x, y, t); }

  void validate() const {
    if (!(sigma > 0.0) || !(alpha > 0.0)) throw InputError("sigma and alpha must be positive");
    if (!(mu_l > 0.0) || mu_l > mu_u) throw InputError("need 0 < mu_l <= mu_u");
  }
};

inline CoefficientSet default_coefficients(DiffusionCase dc) {
  CoefficientSet c;
  c.diffusion = dc;
  return c;
}

/// Manufactured solution on the unit square, every field proportional to t:
///   u = t (sin^2(pi x) sin(pi y) cos(pi y), -sin(pi x) cos(pi x) sin^2(pi y))
///   p = t sin(2 pi x) cos(2 pi y)
///   c = t x y (x - 1)(y - 1)
inline ExactFields exact_solution(double x, double y, double t) {
  constexpr double pi = std::numbers::pi;
  const double s2x = std::sin(2 * pi * x), c2x = std::cos(2 * pi * x);
  const double s2y = std::sin(2 * pi * y), c2y = std::cos(2 * pi * y);
  const double sx = std::sin(pi * x), sy = std::sin(pi * y);

  // u1 = t A(x) B(y), A = sin^2(pi x), B = sin(2 pi y)/2
  const double a = sx * sx, a1 = pi * s2x, a2 = 2 * pi * pi * c2x;
  const double b = 0.5 * s2y, b1 = pi * c2y, b2 = -2 * pi * pi * s2y;
  // u2 = -t C(x) E(y), C = sin(2 pi x)/2, E = sin^2(pi y)
  const double cc = 0.5 * s2x, cc1 = pi * c2x, cc2 = -2 * pi * pi * s2x;
  const double e = sy * sy, e1 = pi * s2y, e2 = 2 * pi * pi * c2y;

  ExactFields f;
  f.u1 = {t * a * b, t * a1 * b, t * a * b1, t * a2 * b, t * a * b2, t * a1 * b1, a * b};
  f.u2 = {-t * cc * e, -t * cc1 * e, -t * cc * e1, -t * cc2 * e, -t * cc * e2, -t * cc1 * e1,
          -cc * e};
  f.p = {t * s2x * c2y,
         t * 2 * pi * c2x * c2y,
         -t * 2 * pi * s2x * s2y,
         -t * 4 * pi * pi * s2x * c2y,
         -t * 4 * pi * pi * s2x * c2y,
         -t * 4 * pi * pi * c2x * s2y,
         s2x * c2y};
  const double X = x * (x - 1), X1 = 2 * x - 1, Y = y * (y - 1), Y1 = 2 * y - 1;
  f.c = {t * X * Y, t * X1 * Y, t * X * Y1, t * 2 * Y, t * 2 * X, t * X1 * Y1, X * Y};
  return f;
}

struct Forcing {
  double f1x = 0.0;
  double f1y = 0.0;
  double f2 = 0.0;
  double g = 0.0;
};

/// Right-hand sides obtained by inserting the manufactured solution into
///   -div(mu(c) grad u) + sigma u + grad p = f1,  div u = f2,
///   dc/dt - d/dx(D1 dc/dx) - d/dy(D2 dc/dy) + u.grad c + alpha c = g.
inline Forcing mms_forcing(double x, double y, double t, const CoefficientSet& k) {
  const auto f = exact_solution(x, y, t);
  const double mu = k.mu(f.c.v);
  const double dmu = k.mu.derivative(f.c.v);
  const double mux = dmu * f.c.dx, muy = dmu * f.c.dy;
  const auto visc = [&](const FieldJet& u) {
    return -mu * (u.dxx + u.dyy) - (mux * u.dx + muy * u.dy);
  };
  const auto d = k.diff(x, y, t);
  Forcing out;
  out.f1x = visc(f.u1) + k.sigma * f.u1.v + f.p.dx;
  out.f1y = visc(f.u2) + k.sigma * f.u2.v + f.p.dy;
  out.f2 = f.u1.dx + f.u2.dy;
  const double diffusion = d.d1 * f.c.dxx + d.d1_dx * f.c.dx + d.d2 * f.c.dyy + d.d2_dy * f.c.dy;
  out.g = f.c.dt - diffusion + f.u1.v * f.c.dx + f.u2.v * f.c.dy + k.alpha * f.c.v;
  return out;
}

/// Supremum of the manufactured concentration at time t.
inline double exact_c_max(double t) { return t / 16.0; }

}  // namespace sdb
