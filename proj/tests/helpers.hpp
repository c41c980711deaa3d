#pragma once

#include <cmath>
#include <random>

#include "sdb/sdb.hpp"

namespace sdb::fixtures {

/// ASGS parameters as the study driver builds them for mesh `d`.
inline StabilizationParams default_taus(const Discretization& d, DiffusionCase dc, double dt) {
  const auto k = default_coefficients(dc);
  const double D = dc == DiffusionCase::zero ? 0.0 : 1.0;
  return make_stabilization(tau_params(d.h_max(), k.mu_stab, k.sigma, k.alpha, D, 1.0), dt);
}

/// A smooth non-trivial state for structural checks.
inline CoupledState wavy_state(const Discretization& d, double t = 0.5) {
  auto s = interpolate_exact(d, t);
  for (Eigen::Index i = 0; i < s.c.size(); ++i) s.c[i] += 0.01 * std::sin(0.7 * double(i));
  return s;
}

inline double max_abs_diff(const SparseMatrix& a, const SparseMatrix& b) {
  return (Eigen::MatrixXd(a) - Eigen::MatrixXd(b)).cwiseAbs().maxCoeff();
}

}  // namespace sdb::fixtures
