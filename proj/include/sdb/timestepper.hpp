#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sdb/analysis.hpp"
#include "sdb/assembly.hpp"
#include "sdb/error.hpp"
#include "sdb/linear_solver.hpp"
#include "sdb/problem.hpp"
#include "sdb/space.hpp"
#include "sdb/stabilization.hpp"

namespace sdb {

/// theta = 1 is backward Euler, theta = 0 is Crank-Nicolson.
struct TimeScheme {
  double theta = 0.0;
  double dt = 0.0;
  double t_final = 1.0;
  std::size_t n_steps = 0;

  /// Uniform steps with dt adjusted down so that n_steps * dt = t_final.
  /// t_final = 0 gives zero steps.
  static TimeScheme fitted(double theta, double dt_target, double t_final) {
    if (!(dt_target > 0.0) || !std::isfinite(dt_target)) throw InputError("dt must be positive");
    if (!(t_final >= 0.0) || !std::isfinite(t_final))
      throw InputError("t_final must be nonnegative");
    TimeScheme s;
    s.theta = theta;
    s.t_final = t_final;
    s.n_steps = static_cast<std::size_t>(std::ceil(t_final / dt_target - 1e-9));
    s.dt = s.n_steps == 0 ? dt_target : t_final / static_cast<double>(s.n_steps);
    s.validate();
    return s;
  }

  void validate() const {
    if (theta != 0.0 && theta != 1.0) throw InputError("theta must be 0 or 1");
    if (!(dt > 0.0)) throw InputError("dt must be positive");
    if (!(t_final >= 0.0)) throw InputError("t_final must be nonnegative");
    if ((n_steps == 0) != (t_final == 0.0))
      throw InputError("n_steps must be zero exactly when t_final is zero");
    if (n_steps > 0 && std::abs(dt * static_cast<double>(n_steps) - t_final) > 1e-9 * t_final)
      throw InputError("n_steps * dt must equal t_final");
  }
};

/// Setup shared by every step of one run.
struct StepperOptions {
  Method method = Method::asgs;
  CoefficientSet coeffs;
  ForcingFn forcing;                   // defaults to the manufactured forcing
  std::optional<StabilizationParams> taus;  // required for ASGS
  int quad_degree = 5;
  unsigned workers = 1;
  bool extrapolate = true;   // second-order lagging under Crank-Nicolson
  bool blowup_guard = true;  // compare |c| with the manufactured maximum
};

/// Advances a coupled state one theta step at a time on a fixed mesh.
class TimeStepper {
 public:
  TimeStepper(const Discretization& d, StepperOptions opt)
      : disc_(&d), opt_(std::move(opt)), asmb_(d, opt_.workers), bc_(boundary_dofs(d)) {
    opt_.coeffs.validate();
    if (!opt_.forcing) opt_.forcing = manufactured_forcing(opt_.coeffs);
    if (opt_.method == Method::asgs && !opt_.taus)
      throw InputError("ASGS needs stabilization parameters");
  }

  const StepperOptions& options() const { return opt_; }

  /// Lagged state for mu(c) and the advecting velocity. With theta = 0 and
  /// a previous level available this is (3 U^n - U^{n-1}) / 2.
  CoupledState lagged_state(const CoupledState& state_n, const CoupledState* prev,
                            double theta) const {
    if (theta == 0.0 && opt_.extrapolate && prev)
      return CoupledState::blend(1.5, state_n, -0.5, *prev, state_n.t);
    return state_n;
  }

  CoupledState step(const CoupledState& state_n, const CoupledState* prev, double dt,
                    double theta, std::size_t step_index) {
    const auto lagged = lagged_state(state_n, prev, theta);
    StepData sd;
    sd.state_n = &state_n;
    sd.lagged = &lagged;
    sd.coeffs = opt_.coeffs;
    sd.forcing = opt_.forcing;
    sd.dt = dt;
    sd.theta = theta;
    sd.step_index = step_index;
    sd.quad_degree = opt_.quad_degree;
    if (opt_.method == Method::asgs && std::abs(opt_.taus->dt - dt) > 1e-14 * dt)
      throw InputError("stabilization parameters were built for a different dt");

    auto sys = asmb_.assemble(sd, opt_.method, opt_.taus ? &*opt_.taus : nullptr);
    apply_dirichlet(sys, bc_, std::vector<double>(bc_.size(), 0.0));
    fix_pressure_gauge(sys);
    auto [x, report] = solver_.solve(sys);
    last_residual_ = report.residual_norm;
    if (!x.allFinite()) throw SolverError("non-finite values in the solution");

    auto next = CoupledState::unpack(disc_->layout, x, state_n.t + dt);
    remove_pressure_mean(*disc_, next.p);
    if (opt_.blowup_guard) {
      const double bound = 10.0 * std::max(exact_c_max(next.t), 1.0e-12);
      const double cmax = next.c.cwiseAbs().maxCoeff();
      if (cmax > bound)
        throw SolverError("step " + std::to_string(step_index) + ": max |c| = " +
                          std::to_string(cmax) + " exceeds 10x the expected maximum");
    }
    return next;
  }

  double last_residual() const { return last_residual_; }

 private:
  const Discretization* disc_;
  StepperOptions opt_;
  Assembler asmb_;
  LinearSolver solver_;
  std::vector<std::size_t> bc_;
  double last_residual_ = 0.0;
};

/// One-off theta step with a fresh assembler and solver.
inline CoupledState theta_step(const Discretization& d, const CoupledState& state_n,
                               const CoupledState* prev, const TimeScheme& scheme,
                               const CoefficientSet& coeffs,
                               const std::optional<StabilizationParams>& taus, Method method,
                               std::size_t step_index) {
  StepperOptions opt;
  opt.method = method;
  opt.coeffs = coeffs;
  opt.taus = taus;
  TimeStepper ts(d, std::move(opt));
  return ts.step(state_n, prev, scheme.dt, scheme.theta, step_index);
}

/// Errors of one recorded time level.
struct StepRecord {
  std::size_t step = 0;
  double t = 0.0;
  FieldErrors errors;
  double residual = 0.0;
};

struct TransientResult {
  CoupledState final_state;
  CoupledState previous_state;  // level N-1, used by the estimator
  FieldErrors final_errors;
  ErrorSeries c_series;         // concentration error series
  ErrorSeries u_series;         // combined velocity error series
  ErrorSeries p_series;
  std::vector<StepRecord> steps;
  double wall_ms = 0.0;
};

struct TransientConfig {
  std::size_t n_side = 10;
  TimeScheme scheme;
  StepperOptions stepper;
  bool track_errors = true;  // per-step errors and time-norm series
  bool verbose = false;      // progress lines on stderr
  std::function<void(const StepRecord&)> on_step;
};

/// Runs from the interpolated manufactured state at t = 0 to t_final.
inline TransientResult run_transient(const Discretization& d, const TransientConfig& cfg) {
  cfg.scheme.validate();
  const auto t0 = std::chrono::steady_clock::now();
  TimeStepper stepper(d, cfg.stepper);
  const double theta = cfg.scheme.theta, dt = cfg.scheme.dt;
  const double a = 0.5 * (1.0 + theta), b = 0.5 * (1.0 - theta);

  TransientResult out;
  auto state = interpolate_exact(d, 0.0);
  std::optional<CoupledState> prev;
  const auto exact_at = [](double t) {
    return [t](double x, double y) { return exact_solution(x, y, t); };
  };
  if (cfg.track_errors) {
    const auto e_old = field_error_integrals(d, state, exact_at(0.0));
    out.c_series.level_l2_sq.push_back(e_old.c_l2);
    out.u_series.level_l2_sq.push_back(e_old.u1_l2 + e_old.u2_l2);
    out.p_series.level_l2_sq.push_back(e_old.p_l2);
  }

  for (std::size_t n = 0; n < cfg.scheme.n_steps; ++n) {
    auto next = stepper.step(state, prev ? &*prev : nullptr, dt, theta, n);
    // Accumulate at t^{n+1} = (n+1) dt rather than by summation to avoid drift.
    next.t = dt * static_cast<double>(n + 1);
    if (cfg.track_errors) {
      const auto e_new = field_error_integrals(d, next, exact_at(next.t));
      // Error at the theta point: U_h^{n,theta} against U(t^{n,theta}).
      const double t_mid = state.t + a * dt;
      const auto mid = CoupledState::blend(a, next, b, state, t_mid);
      const auto e_mid = field_error_integrals(d, mid, exact_at(t_mid));
      out.c_series.level_l2_sq.push_back(e_new.c_l2);
      out.c_series.theta_l2_sq.push_back(e_mid.c_l2);
      out.c_series.theta_h1_sq.push_back(e_mid.c_l2 + e_mid.c_grad);
      out.u_series.level_l2_sq.push_back(e_new.u1_l2 + e_new.u2_l2);
      out.u_series.theta_l2_sq.push_back(e_mid.u1_l2 + e_mid.u2_l2);
      out.u_series.theta_h1_sq.push_back(e_mid.u1_l2 + e_mid.u1_grad + e_mid.u2_l2 +
                                         e_mid.u2_grad);
      out.p_series.level_l2_sq.push_back(e_new.p_l2);
      out.p_series.theta_l2_sq.push_back(e_mid.p_l2);
      out.p_series.theta_h1_sq.push_back(e_mid.p_l2 + e_mid.p_grad);
      StepRecord rec{n + 1, next.t, e_new.norms(), stepper.last_residual()};
      if (cfg.on_step) cfg.on_step(rec);
      out.steps.push_back(rec);
      if (cfg.verbose)
        std::cerr << "  step " << (n + 1) << "/" << cfg.scheme.n_steps << " t=" << next.t
                  << " |e_c|_H1=" << rec.errors.c.h1 << "\n";
    } else if (cfg.verbose) {
      std::cerr << "  step " << (n + 1) << "/" << cfg.scheme.n_steps << " t=" << next.t << "\n";
    }
    prev = std::move(state);
    state = std::move(next);
  }
  out.final_errors = field_error_norms(d, state, state.t);
  out.previous_state = prev ? *prev : state;
  out.final_state = std::move(state);
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

}  // namespace sdb
