#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdb/problem.hpp"
#include "sdb/stabilization.hpp"

using namespace sdb;

namespace {
const double kMu = viscosity(0.0625);
}

TEST(Tau, ExperimentFormulasAtTenthDiameter) {
  const auto k = TauConstants::linear_element_values();
  const auto nz = tau_params(0.1, kMu, 1.0, 0.01, 1.0, 1.0, k);
  EXPECT_NEAR(nz.tau1, 1.0 / (4.0 * kMu / 0.01 + 1.0), 1e-15);
  EXPECT_NEAR(nz.tau1, 2.4893e-3, 5e-8);
  EXPECT_NEAR(nz.tau2, 0.4 + 0.001 * kMu, 1e-15);
  EXPECT_NEAR(nz.tau2, 0.4010018, 5e-8);
  EXPECT_NEAR(nz.tau3, 1.0 / (2.25 / 0.01 + 15.0 + 0.01), 1e-15);
  const auto z = tau_params(0.1, kMu, 1.0, 0.01, 0.0, 1.0, k);
  EXPECT_NEAR(z.tau3, 1.0 / 15.01, 1e-15);
  EXPECT_NEAR(z.tau3, 6.6622e-2, 5e-7);
}

TEST(Tau, DefaultConstantsScaleTheSecondOrderTerms) {
  const TauConstants k;
  EXPECT_EQ(k.c1u, 192.0);
  EXPECT_EQ(k.c_diff, 192.0);
  EXPECT_EQ(k.c2u, 1.0);
  EXPECT_EQ(k.c_adv, 1.5);
  const auto t = tau_params(0.1, kMu, 1.0, 0.01, 1.0, 1.0);
  EXPECT_NEAR(t.tau1, 1.0 / (192.0 * kMu / 0.01 + 1.0), 1e-15);
}

TEST(Tau, GenericTau2Form) {
  TauConstants k;
  k.tau2_form = TauConstants::Tau2Form::generic;
  const auto t = tau_params(0.1, 1.0, 1.0, 0.01, 1.0, 1.0, k);
  EXPECT_NEAR(t.tau2, 0.001 + 4.0 * 0.01, 1e-15);
}

TEST(Tau, DecreaseUnderRefinement) {
  for (double h : {0.2, 0.1, 0.05}) {
    const auto a = tau_params(h, kMu, 1.0, 0.01, 1.0, 1.0);
    const auto b = tau_params(h / 2, kMu, 1.0, 0.01, 1.0, 1.0);
    EXPECT_LT(b.tau1, a.tau1);
    EXPECT_LT(b.tau3, a.tau3);
    EXPECT_GT(b.tau1, 0.0);
    EXPECT_GT(b.tau2, 0.0);
  }
}

TEST(Tau, RejectsInvalidInput) {
  EXPECT_THROW(tau_params(0.0, 1, 1, 0.01, 1, 1), InputError);
  EXPECT_THROW(tau_params(0.1, 0, 1, 0.01, 1, 1), InputError);
  EXPECT_THROW(tau_params(0.1, 1, -1, 0.01, 1, 1), InputError);
  EXPECT_THROW(make_stabilization({-1, 0, 0}, 0.1), InputError);
  EXPECT_THROW(make_stabilization({1, 1, 1}, 0.0), InputError);
}

TEST(TauPrime, Values) {
  EXPECT_NEAR(tau_prime(0.0666, 0.1), 0.1 * 0.0666 / 0.1666, 1e-17);
  EXPECT_NEAR(tau_prime(0.0666, 0.1), 3.9976e-2, 5e-7);
  EXPECT_DOUBLE_EQ(tau_prime(0.01, 0.01), 0.005);
  EXPECT_NEAR(tau_prime(1e12, 0.01), 0.01, 1e-10);
  EXPECT_EQ(tau_prime(0.0, 0.01), 0.0);
  EXPECT_THROW(tau_prime(0.1, 0.0), InputError);
}

TEST(SeriesFactor, Values) {
  EXPECT_DOUBLE_EQ(d_series_factor(0.05, 0.1), 2.0);
  EXPECT_DOUBLE_EQ(d_series_factor(0.0, 0.1), 1.0);
  const double tp = tau_prime(0.0666, 0.1);
  EXPECT_NEAR(d_series_factor(tp, 0.1), 1.666, 1e-12);
  EXPECT_NEAR(tp * d_series_factor(tp, 0.1), 0.0666, 1e-15);
  EXPECT_THROW(d_series_factor(0.1, 0.1), InputError);
}

TEST(SeriesFactor, TruncatedSumConvergesToClosedForm) {
  const double tp = tau_prime(0.05, 0.02);
  EXPECT_DOUBLE_EQ(d_series_truncated(tp, 0.02, 0), 1.0);
  EXPECT_NEAR(d_series_truncated(tp, 0.02, 400), d_series_factor(tp, 0.02), 1e-12);
  EXPECT_LT(d_series_truncated(tp, 0.02, 3), d_series_factor(tp, 0.02));
}

TEST(StabilizationParams, IdentitiesOverRandomDraws) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> lg(-4.0, 0.0);
  for (int i = 0; i < 1000; ++i) {
    const double tau3 = std::pow(10.0, lg(rng)), dt = std::pow(10.0, lg(rng));
    const auto s = make_stabilization({0.1, 0.2, tau3}, dt);
    EXPECT_LT(s.tau3_p, std::min(dt, tau3));
    EXPECT_LE(std::abs(s.tau3_p * s.d_factor - tau3), 1e-14 * tau3);
    EXPECT_EQ(s.tau1_p, s.tau1);
    EXPECT_EQ(s.tau2_p, s.tau2);
    EXPECT_NEAR(s.transport_adjoint_weight(5), tau3, 1e-14 * tau3);
    EXPECT_NEAR(s.transport_mass_weight(5), 0.0, 1e-14);
    // The series form agrees up to the cancellation in dt - tau3'.
    const double rel = std::abs(d_series_factor(s.tau3_p, dt) - s.d_factor) / s.d_factor;
    EXPECT_LT(rel, 1e-15 * (2.0 + 4.0 * tau3 / dt));
  }
}

TEST(StabilizationParams, TruncatedModeDependsOnStep) {
  const auto s = make_stabilization({0.1, 0.2, 0.05}, 0.02, SubscaleSeries::truncated);
  EXPECT_LT(s.transport_adjoint_weight(0), s.transport_adjoint_weight(10));
  EXPECT_GT(s.transport_mass_weight(0), 0.0);
  EXPECT_NEAR(s.transport_adjoint_weight(2000), s.tau3, 1e-12);
}
