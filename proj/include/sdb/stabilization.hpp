#pragma once

#include <cmath>
#include <cstddef>

#include "sdb/error.hpp"

namespace sdb {

/// Constants of the algebraic subgrid-scale parameters.
///
///   tau1 = (c1u mu / h^2 + c2u sigma)^-1
///   tau2 = c_sigma_h sigma h + c_mu mu           (Tau2Form::experiment)
///        = c1p mu + c2p sigma h^2                (Tau2Form::generic)
///   tau3 = (c_diff D / h^2 + c_adv U / h + alpha)^-1
///
/// c1u and c_diff default to 192 rather than the linear-element values 4 and
/// 9/4: for P2 on these meshes ||lap v||^2 <= 96 / h^2 ||grad v||^2 (h the
/// diameter), and the -tau (lap u, lap v) terms keep the viscous and
/// diffusive forms coercive only above 96. linear_element_values() restores both.
struct TauConstants {
  enum class Tau2Form { experiment, generic };

  static constexpr double kP2InverseConstant = 96.0;

  double c1u = 2.0 * kP2InverseConstant;
  double c2u = 1.0;
  Tau2Form tau2_form = Tau2Form::experiment;
  double c_sigma_h = 4.0;
  double c_mu = 0.001;
  double c1p = 0.001;
  double c2p = 4.0;
  double c_diff = 2.0 * kP2InverseConstant;
  double c_adv = 3.0 / 2.0;

  static TauConstants linear_element_values() {
    TauConstants k;
    k.c1u = 4.0;
    k.c_diff = 9.0 / 4.0;
    return k;
  }
};

struct TauValues {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double tau3 = 0.0;
};

inline TauValues tau_params(double h, double mu_l, double sigma, double alpha, double d_scale,
                            double u_scale, const TauConstants& k = {}) {
  if (!(h > 0.0)) throw InputError("element diameter must be positive");
  if (!(mu_l > 0.0)) throw InputError("mu_l must be positive");
  if (sigma < 0.0 || alpha < 0.0 || d_scale < 0.0 || u_scale < 0.0)
    throw InputError("sigma, alpha, D and U scales must be nonnegative");
  TauValues t;
  t.tau1 = 1.0 / (k.c1u * mu_l / (h * h) + k.c2u * sigma);
  t.tau2 = k.tau2_form == TauConstants::Tau2Form::experiment
               ? k.c_sigma_h * sigma * h + k.c_mu * mu_l
               : k.c1p * mu_l + k.c2p * sigma * h * h;
  t.tau3 = 1.0 / (k.c_diff * d_scale / (h * h) + k.c_adv * u_scale / h + alpha);
  return t;
}

/// Time-modified transport parameter (1/dt + 1/tau3)^-1.
inline double tau_prime(double tau3, double dt) {
  if (tau3 < 0.0 || !(dt > 0.0)) throw InputError("tau_prime needs tau3 >= 0, dt > 0");
  return tau3 * dt / (dt + tau3);
}

/// 1 + sum_{i>=1} (tau3'/dt)^i = 1 / (1 - tau3'/dt).
inline double d_series_factor(double tau3_p, double dt) {
  if (!(dt > 0.0) || tau3_p < 0.0) throw InputError("d_series_factor needs tau3' >= 0, dt > 0");
  if (tau3_p >= dt) throw InputError("d_series_factor diverges: tau3' >= dt");
  return dt / (dt - tau3_p);
}

/// 1 + sum_{i=1}^{terms} (tau3'/dt)^i.
inline double d_series_truncated(double tau3_p, double dt, std::size_t terms) {
  const double r = tau3_p / dt;
  double sum = 1.0, power = 1.0;
  for (std::size_t i = 0; i < terms; ++i) {
    power *= r;
    sum += power;
  }
  return sum;
}

enum class SubscaleSeries { closed_form, truncated };

/// Element parameters for one time step. Structured meshes have a single
/// h, so one set serves every element.
struct StabilizationParams {
  double tau1 = 0.0;
  double tau2 = 0.0;
  double tau3 = 0.0;
  double tau1_p = 0.0;
  double tau2_p = 0.0;
  double tau3_p = 0.0;
  double d_factor = 1.0;
  double dt = 0.0;
  SubscaleSeries series = SubscaleSeries::closed_form;

  /// Series multiplier S with d = (S - 1) R for the transport row. The
  /// truncated form keeps step_index + 1 terms.
  double series_factor(std::size_t step_index) const {
    return series == SubscaleSeries::closed_form
               ? d_factor
               : d_series_truncated(tau3_p, dt, step_index + 1);
  }

  /// Weight of (R, L* d) in the transport row: tau3' S.
  double transport_adjoint_weight(std::size_t step_index) const {
    return tau3_p * series_factor(step_index);
  }

  /// Weight of (R, d) in the transport row: (1 - tau3^-1 tau3') - tau3^-1 tau3' (S - 1).
  double transport_mass_weight(std::size_t step_index) const {
    const double ratio = dt / (dt + tau3);  // tau3^-1 tau3', finite at tau3 = 0
    return 1.0 - ratio * series_factor(step_index);
  }
};

inline StabilizationParams make_stabilization(const TauValues& t, double dt,
                                              SubscaleSeries series = SubscaleSeries::closed_form) {
  if (t.tau1 < 0.0 || t.tau2 < 0.0 || t.tau3 < 0.0)
    throw InputError("stabilization parameters must be nonnegative");
  if (!(dt > 0.0)) throw InputError("dt must be positive");
  StabilizationParams s;
  s.tau1 = s.tau1_p = t.tau1;
  s.tau2 = s.tau2_p = t.tau2;
  s.tau3 = t.tau3;
  s.tau3_p = tau_prime(t.tau3, dt);
  // Equal to d_series_factor(tau3', dt) but free of cancellation when tau3 >> dt.
  s.d_factor = (dt + t.tau3) / dt;
  s.dt = dt;
  s.series = series;
  return s;
}

}  // namespace sdb
