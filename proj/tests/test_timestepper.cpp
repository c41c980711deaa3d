#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "sdb/sdb.hpp"

using namespace sdb;

namespace {

// Pinned after the assembly and forcing oracles passed.
constexpr double kRegressionCH1 = 1.3715038166194006e-4;

TransientConfig make_config(const Discretization& d, DiffusionCase dc, Method m, double theta,
                            double dt, double t_final) {
  TransientConfig cfg;
  cfg.scheme = TimeScheme::fitted(theta, dt, t_final);
  cfg.stepper.method = m;
  cfg.stepper.coeffs = default_coefficients(dc);
  cfg.stepper.taus = fixtures::default_taus(d, dc, cfg.scheme.dt);
  return cfg;
}

}  // namespace

TEST(TimeScheme, FittedStepsCoverTheInterval) {
  const auto s = TimeScheme::fitted(1.0, 0.3, 1.0);
  EXPECT_EQ(s.n_steps, 4u);
  EXPECT_DOUBLE_EQ(s.dt, 0.25);
  EXPECT_EQ(TimeScheme::fitted(0.0, 0.1, 1.0).n_steps, 10u);
  EXPECT_EQ(TimeScheme::fitted(0.0, 0.1, 0.0).n_steps, 0u);
  EXPECT_THROW(TimeScheme::fitted(0.5, 0.1, 1.0), InputError);
  EXPECT_THROW(TimeScheme::fitted(0.0, -0.1, 1.0), InputError);
  EXPECT_THROW(TimeScheme::fitted(0.0, 0.1, -1.0), InputError);
}

TEST(ThetaStep, ZeroForcingKeepsZeroState) {
  const auto d = build_discretization(4);
  StepperOptions opt;
  opt.method = Method::asgs;
  opt.coeffs = default_coefficients(DiffusionCase::nonzero);
  opt.forcing = zero_forcing();
  opt.taus = fixtures::default_taus(d, DiffusionCase::nonzero, 0.1);
  TimeStepper ts(d, opt);
  const auto z = CoupledState::zero(d.layout);
  const auto next = ts.step(z, nullptr, 0.1, 1.0, 0);
  EXPECT_EQ(next.pack(d.layout).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(next.t, 0.1);
}

TEST(ThetaStep, OneBackwardEulerStepRegression) {
  const auto d = build_discretization(10);
  const auto s0 = interpolate_exact(d, 0.0);
  EXPECT_EQ(s0.pack(d.layout).cwiseAbs().maxCoeff(), 0.0);
  const auto scheme = TimeScheme::fitted(1.0, 0.1, 0.1);
  const auto k = default_coefficients(DiffusionCase::nonzero);
  const auto s1 = theta_step(d, s0, nullptr, scheme, k,
                             fixtures::default_taus(d, DiffusionCase::nonzero, scheme.dt),
                             Method::asgs, 0);
  const auto e = field_error_norms(d, s1, 0.1);
  EXPECT_TRUE(std::isfinite(e.c.h1));
  EXPECT_LT(e.c.h1, 1.0);
  EXPECT_NEAR(e.c.h1, kRegressionCH1, 1e-9 * kRegressionCH1);
  EXPECT_NEAR(integrate_p1(d, s1.p), 0.0, 1e-13);
}

TEST(ThetaStep, CrankNicolsonExtrapolatesLaggedState) {
  const auto d = build_discretization(3);
  StepperOptions opt;
  opt.method = Method::galerkin;
  opt.coeffs = default_coefficients(DiffusionCase::zero);
  TimeStepper ts(d, opt);
  auto a = interpolate_exact(d, 0.1), b = interpolate_exact(d, 0.2);
  const auto lag = ts.lagged_state(b, &a, 0.0);
  EXPECT_NEAR((lag.c - (1.5 * b.c - 0.5 * a.c)).cwiseAbs().maxCoeff(), 0.0, 1e-17);
  EXPECT_EQ((ts.lagged_state(b, &a, 1.0).c - b.c).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((ts.lagged_state(b, nullptr, 0.0).c - b.c).cwiseAbs().maxCoeff(), 0.0);
}

TEST(ThetaStep, RejectsMismatchedStabilizationStep) {
  const auto d = build_discretization(3);
  StepperOptions opt;
  opt.coeffs = default_coefficients(DiffusionCase::zero);
  opt.taus = fixtures::default_taus(d, DiffusionCase::zero, 0.1);
  TimeStepper ts(d, opt);
  EXPECT_THROW(ts.step(interpolate_exact(d, 0.0), nullptr, 0.2, 1.0, 0), InputError);
  StepperOptions none;
  none.method = Method::asgs;
  EXPECT_THROW(TimeStepper(d, none), InputError);
}

TEST(ThetaStep, BlowUpGuardTrips) {
  const auto d = build_discretization(3);
  StepperOptions opt;
  opt.method = Method::galerkin;
  opt.coeffs = default_coefficients(DiffusionCase::zero);
  opt.forcing = [](double, double, double) { return Forcing{0, 0, 0, 1e4}; };
  TimeStepper ts(d, opt);
  EXPECT_THROW(ts.step(CoupledState::zero(d.layout), nullptr, 0.1, 1.0, 0), SolverError);
}

TEST(Transient, ZeroFinalTimeReturnsInitialState) {
  const auto d = build_discretization(4);
  auto cfg = make_config(d, DiffusionCase::nonzero, Method::asgs, 0.0, 0.1, 0.0);
  const auto r = run_transient(d, cfg);
  EXPECT_EQ(r.final_state.pack(d.layout).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(r.steps.empty());
  EXPECT_EQ(r.final_errors.c.h1, 0.0);
}

TEST(Transient, ZeroDiffusionAsgsConvergesUnderRefinement) {
  double prev = 0.0;
  for (std::size_t n : {10u, 20u}) {
    const auto d = build_discretization(n);
    auto cfg = make_config(d, DiffusionCase::zero, Method::asgs, 0.0, d.h_max(), 1.0);
    const auto r = run_transient(d, cfg);
    for (const auto& s : r.steps) ASSERT_TRUE(std::isfinite(s.errors.c.h1));
    if (prev > 0.0) EXPECT_LT(r.final_errors.c.h1, prev);
    prev = r.final_errors.c.h1;
  }
}

TEST(Transient, AsgsNoWorseThanGalerkin) {
  const auto d = build_discretization(10);
  for (auto dc : {DiffusionCase::zero, DiffusionCase::nonzero}) {
    const auto g = run_transient(d, make_config(d, dc, Method::galerkin, 0.0, d.h_max(), 1.0));
    const auto a = run_transient(d, make_config(d, dc, Method::asgs, 0.0, d.h_max(), 1.0));
    EXPECT_LE(a.final_errors.c.h1, g.final_errors.c.h1) << to_string(dc);
  }
}

TEST(Transient, BitwiseReproducible) {
  const auto d = build_discretization(6);
  auto cfg = make_config(d, DiffusionCase::nonzero, Method::asgs, 0.0, 0.1, 0.5);
  const auto a = run_transient(d, cfg);
  cfg.stepper.workers = 2;
  const auto b = run_transient(d, cfg);
  const auto xa = a.final_state.pack(d.layout), xb = b.final_state.pack(d.layout);
  for (Eigen::Index i = 0; i < xa.size(); ++i) ASSERT_EQ(xa[i], xb[i]);
}

TEST(Transient, RecordsSeriesForEveryStep) {
  const auto d = build_discretization(4);
  auto cfg = make_config(d, DiffusionCase::nonzero, Method::galerkin, 1.0, 0.25, 1.0);
  std::size_t calls = 0;
  cfg.on_step = [&](const StepRecord& r) {
    ++calls;
    EXPECT_GE(r.errors.c.h1, r.errors.c.l2);
  };
  const auto r = run_transient(d, cfg);
  EXPECT_EQ(calls, 4u);
  EXPECT_EQ(r.c_series.level_l2_sq.size(), 5u);
  EXPECT_EQ(r.c_series.theta_h1_sq.size(), 4u);
  EXPECT_DOUBLE_EQ(r.final_state.t, 1.0);
}
