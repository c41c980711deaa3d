#include <gtest/gtest.h>

#include "helpers.hpp"
#include "sdb/sdb.hpp"

using namespace sdb;

namespace {

BlockSystem dense_system(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, BlockLayout l) {
  BlockSystem s;
  s.matrix = a.sparseView();
  s.matrix.makeCompressed();
  s.rhs = b;
  s.layout = l;
  return s;
}

}  // namespace

TEST(LinearSolver, Identity) {
  const auto s = dense_system(Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Unit(4, 0),
                              {1, 1});
  const auto [x, rep] = solve_linear(s);
  EXPECT_TRUE(rep.factorization_ok);
  EXPECT_NEAR((x - Eigen::VectorXd::Unit(4, 0)).norm(), 0.0, 1e-15);
}

TEST(LinearSolver, TwoByTwo) {
  Eigen::MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  const auto s = dense_system(a, Eigen::Vector2d(1, 1), {0, 2});
  const auto [x, rep] = solve_linear(s);
  EXPECT_NEAR(x[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0 / 3.0, 1e-15);
  EXPECT_LT(rep.residual_norm, 1e-15);
}

TEST(LinearSolver, AssembledSystemResidual) {
  const auto d = build_discretization(4);
  const auto sn = interpolate_exact(d, 0.3);
  StepData sd;
  sd.state_n = &sn;
  sd.lagged = &sn;
  sd.coeffs = default_coefficients(DiffusionCase::nonzero);
  sd.forcing = manufactured_forcing(sd.coeffs);
  sd.dt = 0.1;
  Assembler asmb(d);
  auto sys = assemble_asgs(asmb, sd, fixtures::default_taus(d, DiffusionCase::nonzero, sd.dt));
  apply_homogeneous_dirichlet(sys, d);
  fix_pressure_gauge(sys);
  LinearSolver solver;
  const auto [x, rep] = solver.solve(sys);
  EXPECT_LT(rep.residual_norm, 1e-10);
  EXPECT_LT((sys.matrix * x - sys.rhs).norm() / sys.rhs.norm(), 1e-10);
  // Second solve reuses the symbolic analysis.
  const auto [x2, rep2] = solver.solve(sys);
  EXPECT_EQ((x - x2).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LinearSolver, ZeroPressureColumnIsNamed) {
  // Without the gauge pin the pressure constant is free; removing a whole
  // pressure column makes the failure structural.
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(5, 5);
  a(3, 3) = 0.0;  // layout: n_p2 = 1 -> u1 0, u2 1, p 2..3, c 4
  const auto s = dense_system(a, Eigen::VectorXd::Ones(5), {1, 2});
  try {
    solve_linear(s);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("block p"), std::string::npos) << e.what();
  }
}

TEST(LinearSolver, NumericallySingularBlockIsNamed) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
  a(0, 1) = 1.0;
  a(1, 0) = 1.0;
  a(1, 1) = 1.0;  // u1/u2 rows identical: singular in the velocity block
  const auto s = dense_system(a, Eigen::VectorXd::Ones(4), {1, 1});
  EXPECT_THROW(solve_linear(s), SolverError);
}

TEST(LinearSolver, RejectsMismatchedDimensions) {
  auto s = dense_system(Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(2), {1, 0});
  EXPECT_THROW(solve_linear(s), InputError);
}
