#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fgl/flows.hpp"
#include "fgl/reference.hpp"
#include "test_util.hpp"

using namespace fgl;

TEST(NonlinearFlow, LinearGrowthOnly) {
  const Nonlinearity g{0.0, 0.0, 0.7};
  const CMatrix u = test::random_field(6, 5, 1);
  for (double tau : {0.0, 1e-3, 0.5, 2.0})
    EXPECT_LE(test::rel_diff(nonlinear_flow(u, tau, g), std::exp(0.7 * tau) * u), 1e-14);
}

TEST(NonlinearFlow, PureCubicDecayByHand) {
  // rho' = -2 rho^2, rho(0) = 1  =>  rho(1) = 1/3.
  const Nonlinearity g{1.0, 0.0, 0.0};
  const Complex u1 = nonlinear_closed_form(Complex(1.0, 0.0), 1.0, g);
  EXPECT_NEAR(std::abs(u1), 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(std::arg(u1), 0.0, 1e-15);
}

TEST(NonlinearFlow, PhaseRotationWithoutDamping) {
  // kappa = gamma = 0: |u| is constant and the phase turns at rate -xi |u|^2.
  const Nonlinearity g{0.0, 2.0, 0.0};
  const Complex u0 = std::polar(1.5, 0.3);
  const Complex u1 = nonlinear_closed_form(u0, 0.4, g);
  EXPECT_NEAR(std::abs(u1), 1.5, 1e-14);
  EXPECT_NEAR(std::arg(u1), 0.3 - 2.0 * 2.25 * 0.4, 1e-14);
}

TEST(NonlinearFlow, ZeroStaysZero) {
  const Nonlinearity g{1.0, 1.0, 1.0};
  EXPECT_EQ(nonlinear_closed_form(Complex(0.0, 0.0), 1.0, g), Complex(0.0, 0.0));
}

TEST(NonlinearFlow, ClosedFormMatchesFineRk4) {
  const CMatrix u = 2.0 * test::random_field(8, 7, 3);
  for (const Nonlinearity& g : {Nonlinearity{1.0, 1.0, 0.0}, Nonlinearity{1.0, 2.0, 1.0}, Nonlinearity{0.5, -1.0, -0.3},
                                Nonlinearity{0.0, 1.0, 0.5}}) {
    for (double tau : {1e-3, 0.1}) {
      const CMatrix exact = nonlinear_flow(u, tau, g);
      const CMatrix rk = nonlinear_flow(u, tau, g, nonlinear::RK4{tau < 0.01 ? 1000 : 10000});
      EXPECT_LE((exact - rk).cwiseAbs().maxCoeff(), 1e-10)
          << "kappa=" << g.kappa << " xi=" << g.xi << " gamma=" << g.gamma << " tau=" << tau;
    }
  }
}

TEST(NonlinearFlow, Semiflow) {
  const Nonlinearity g{1.0, 1.0, 0.4};
  const CMatrix u = test::random_field(10, 10, 4);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const double t = dist(rng), s = dist(rng);
    EXPECT_LE(test::rel_diff(nonlinear_flow(nonlinear_flow(u, s, g), t, g), nonlinear_flow(u, t + s, g)), 1e-13);
  }
}

TEST(NonlinearFlow, LogisticBound) {
  const Nonlinearity g{2.0, 1.0, 1.0};
  const double cap = g.gamma / g.kappa;
  const CMatrix u = 3.0 * test::random_field(12, 12, 5);
  for (double tau : {1e-2, 1.0, 10.0, 100.0}) {
    const CMatrix out = nonlinear_flow(u, tau, g);
    for (Index j = 0; j < u.cols(); ++j)
      for (Index i = 0; i < u.rows(); ++i)
        EXPECT_LE(std::norm(out(i, j)), std::max(std::norm(u(i, j)), cap) * (1.0 + 1e-14));
  }
}

TEST(NonlinearFlow, RejectsNegativeTimeAndBadSubsteps) {
  const Nonlinearity g{1.0, 1.0, 0.0};
  EXPECT_THROW(nonlinear_flow(CMatrix::Ones(2, 2), -0.1, g), ArgumentError);
  EXPECT_THROW(nonlinear_flow(CMatrix::Ones(2, 2), 0.1, g, nonlinear::RK4{0}), ArgumentError);
}

TEST(LieTrotter, ExactWhenSubflowsCommute) {
  // G = gamma U commutes with the linear flow, so splitting introduces no error.
  FglParams p = FglParams::example1(1.4, 1.8);
  p.kappa = 0.0;
  p.xi = 0.0;
  p.gamma = 0.3;
  p.t_final = 0.5;
  const Grid grid = Grid::square(p, 24, 10);
  const CMatrix u0 = initial_field(p, grid);
  const CMatrix split = integrate_full(u0, SplitStepper::make(p, grid), grid.m).final_field;
  const FracOperator ox = build_operator(p, grid, Axis::X), oy = build_operator(p, grid, Axis::Y);
  const CMatrix exact = std::exp(p.gamma * p.t_final) *
                        linear_flow(u0, ExpBackend::dense(ox, p.t_final), ExpBackend::dense(oy, p.t_final));
  EXPECT_LE(test::rel_diff(split, exact), 1e-11);
}

TEST(LieTrotter, FirstOrderAgainstFullOdeOracle) {
  FglParams p = FglParams::example1(1.5, 1.5);
  p.t_final = 0.25;
  const int n = 16;
  const Grid fine = Grid::square(p, n, 4000);
  const CMatrix u0 = initial_field(p, fine);
  const CMatrix oracle = rk4_full_ode(u0, p, fine, fine.m);
  double prev = 0.0;
  for (int m : {8, 16, 32}) {
    const Grid g = Grid::square(p, n, m);
    const double e = relerr(integrate_full(u0, SplitStepper::make(p, g), m).final_field, oracle);
    if (prev > 0.0) {
      const double ratio = prev / e;
      EXPECT_GT(ratio, 1.7) << "m=" << m;
      EXPECT_LT(ratio, 2.3) << "m=" << m;
    }
    prev = e;
  }
}

TEST(LieTrotter, DenseAndKrylovBackendsAgree) {
  FglParams p = FglParams::example2(1.3, 1.7);
  p.t_final = 0.1;
  const Grid g = Grid::square(p, 32, 5);
  const CMatrix u0 = initial_field(p, g);
  const CMatrix dense = integrate_full(u0, SplitStepper::make(p, g), g.m).final_field;
  const CMatrix kry = integrate_full(u0, SplitStepper::make(p, g, nonlinear::ClosedForm{}, 0), g.m).final_field;
  EXPECT_LE(test::rel_diff(kry, dense), 1e-8);
}

TEST(IntegrateFull, SingleStepIsOneSplitStep) {
  const FglParams p = FglParams::example1();
  const Grid g = Grid::square(p, 16, 20);
  const SplitStepper st = SplitStepper::make(p, g);
  const CMatrix u0 = initial_field(p, g);
  const auto traj = integrate_full(u0, st, 1, {1});
  EXPECT_EQ((traj.final_field - lie_trotter_step(u0, st)).norm(), 0.0);
  ASSERT_EQ(traj.snapshots.size(), 1u);
  EXPECT_EQ(traj.snapshots[0].first, 1);
}

TEST(IntegrateFull, AbortsOnNonFinite) {
  const FglParams p = FglParams::example1();
  const Grid g = Grid::square(p, 16, 20);
  CMatrix u0 = initial_field(p, g);
  u0(3, 4) = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
  try {
    integrate_full(u0, SplitStepper::make(p, g), 5);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.step(), 1);
  }
  EXPECT_THROW(integrate_full(u0, SplitStepper::make(p, g), 0), ArgumentError);
}
