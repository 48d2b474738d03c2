#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "lanesafe/numerics/dare.hpp"
#include "lanesafe/numerics/expm.hpp"
#include "lanesafe/numerics/lp.hpp"
#include "lanesafe/numerics/polytope.hpp"
#include "lanesafe/numerics/qp.hpp"
#include "lanesafe/numerics/rk4.hpp"
#include "oracles.hpp"

using namespace lanesafe;
using namespace lanesafe::numerics;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using oracle::enumerate_qp;
using oracle::random_matrix;
using oracle::taylor_exponential;

// ---------------------------------------------------------------------------
// Matrix exponential

TEST(MatrixExponential, ZeroIsIdentity) {
  EXPECT_TRUE(matrix_exponential(MatrixXd::Zero(3, 3)).isApprox(MatrixXd::Identity(3, 3), 0.0));
}

TEST(MatrixExponential, DiagonalExponentiatesEntries) {
  const VectorXd d = (VectorXd(4) << -3.0, -0.2, 0.0, 1.5).finished();
  const MatrixXd e = matrix_exponential(d.asDiagonal());
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(e(i, i), std::exp(d(i)), 1e-13 * std::exp(d(i)));
  EXPECT_NEAR((e - MatrixXd(e.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(MatrixExponential, MatchesLongTaylorSeries) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    MatrixXd m = random_matrix(rng, 4, 4);
    m *= 0.95 / m.operatorNorm();
    const MatrixXd diff = matrix_exponential(m) - taylor_exponential(m, 30);
    EXPECT_LE(diff.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MatrixExponential, LargeNormUsesSquaring) {
  const MatrixXd m = (MatrixXd(2, 2) << 0.0, 6.0, -6.0, 0.0).finished();
  const MatrixXd rot = (MatrixXd(2, 2) << std::cos(6.0), std::sin(6.0), -std::sin(6.0), std::cos(6.0)).finished();
  EXPECT_LE((matrix_exponential(m) - rot).cwiseAbs().maxCoeff(), 1e-12);
}

// ---------------------------------------------------------------------------
// RK4

TEST(Rk4, ZeroDerivativeKeepsState) {
  const auto f = [](double, const Eigen::Vector2d&) { return Eigen::Vector2d::Zero().eval(); };
  const Eigen::Vector2d x(1.0, -2.0);
  EXPECT_EQ(rk4_step(f, x, 0.0, 0.1), x);
}

TEST(Rk4, ExponentialSingleStep) {
  const auto f = [](double, const Eigen::Matrix<double, 1, 1>& x) { return x; };
  const Eigen::Matrix<double, 1, 1> x0(1.0);
  const double x1 = rk4_step(f, x0, 0.0, 0.1)(0);
  EXPECT_NEAR(x1, 1.10517083, 5e-9);
  EXPECT_LT(std::abs(x1 - std::exp(0.1)), 1e-7);
}

TEST(Rk4, GlobalOrderFour) {
  const auto f = [](double, const Eigen::Matrix<double, 1, 1>& x) { return x; };
  const auto error = [&](int steps) {
    Eigen::Matrix<double, 1, 1> x(1.0);
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) x = rk4_step(f, x, k * dt, dt);
    return std::abs(x(0) - std::exp(1.0));
  };
  for (int n : {10, 20, 40}) {
    const double ratio = error(n) / error(2 * n);
    EXPECT_GT(ratio, 15.0);
    EXPECT_LT(ratio, 17.0);
  }
}

TEST(Rk4, RejectsNonPositiveStep) {
  const auto f = [](double, const Eigen::Vector2d& x) { return x; };
  EXPECT_THROW(rk4_step(f, Eigen::Vector2d(1, 1), 0.0, 0.0), DomainError);
}

TEST(Rk4, RejectsNonFiniteDerivative) {
  const auto f = [](double, const Eigen::Vector2d&) {
    return Eigen::Vector2d(std::numeric_limits<double>::quiet_NaN(), 0.0);
  };
  EXPECT_THROW(rk4_step(f, Eigen::Vector2d(1, 1), 0.0, 0.1), NumericalError);
}

// ---------------------------------------------------------------------------
// QP

TEST(Qp, ScalarProjection) {
  QpProblem p;
  p.hessian = MatrixXd::Constant(1, 1, 2.0);
  p.gradient = VectorXd::Constant(1, -6.0);
  p.constraint_matrix = MatrixXd::Constant(1, 1, 1.0);
  p.constraint_bound = VectorXd::Constant(1, 2.0);
  const QpSolution s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.z(0), 2.0, 1e-12);
  EXPECT_EQ(s.active_set, std::vector<int>{0});
  EXPECT_NEAR(s.multipliers(0), 2.0, 1e-12);
}

TEST(Qp, CoordinateProjection) {
  QpProblem p;
  p.hessian = MatrixXd::Identity(4, 4) * 2.0;
  p.gradient = VectorXd::Zero(4);
  p.constraint_matrix = MatrixXd::Zero(1, 4);
  p.constraint_matrix(0, 0) = -1.0;
  p.constraint_bound = VectorXd::Constant(1, -1.0);
  const QpSolution s = solve_qp(p);
  ASSERT_TRUE(s.optimal());
  EXPECT_LE((s.z - VectorXd::Unit(4, 0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Qp, DetectsInfeasibility) {
  QpProblem p;
  p.hessian = MatrixXd::Identity(1, 1);
  p.gradient = VectorXd::Zero(1);
  p.constraint_matrix = (MatrixXd(2, 1) << 1.0, -1.0).finished();
  p.constraint_bound = (VectorXd(2) << -1.0, -1.0).finished();
  EXPECT_EQ(solve_qp(p).status, QpStatus::kInfeasible);
}

TEST(Qp, AgreesWithExhaustiveEnumeration) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> rows(1, 6);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const QpProblem p = oracle::random_qp(rng, 5, rows(rng));
    const QpSolution s = solve_qp(p);
    const auto reference = enumerate_qp(p);
    ASSERT_TRUE(s.optimal()) << "trial " << trial;
    ASSERT_TRUE(reference.has_value()) << "trial " << trial;
    EXPECT_LE((s.z - *reference).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;

    const KktResiduals r = kkt_residuals(p, s.z, s.multipliers);
    EXPECT_LE(r.stationarity, 1e-9);
    EXPECT_LE(r.primal, 1e-9);
    EXPECT_LE(r.complementarity, 1e-9);
    EXPECT_LE(r.dual, 1e-12);
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

// ---------------------------------------------------------------------------
// LP

TEST(Lp, ScalarUpperBound) {
  const LpResult r = solve_lp(VectorXd::Constant(1, 1.0), MatrixXd::Constant(1, 1, 1.0),
                              VectorXd::Constant(1, 2.0));
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
}

TEST(Lp, BoxVertexOptimum) {
  const Polytope box = Polytope::symmetric_box(VectorXd::Ones(2));
  const LpResult r = solve_lp(VectorXd::Ones(2), box.f, box.g);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  EXPECT_LE((r.vertex - VectorXd::Ones(2)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lp, CertifiesRedundantRow) {
  const MatrixXd f = (MatrixXd(3, 2) << 1, 0, -1, 0, 0, 1).finished();
  const VectorXd g = (VectorXd(3) << 2, 2, 1).finished();
  const LpResult r = solve_lp(VectorXd::Unit(2, 0), f, g);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  EXPECT_LT(r.value, 3.0);

  const MatrixXd with_redundant = (MatrixXd(4, 2) << 1, 0, -1, 0, 0, 1, 1, 0).finished();
  const VectorXd bounds = (VectorXd(4) << 2, 2, 1, 3).finished();
  const Polytope reduced = remove_redundant_rows(Polytope(with_redundant, bounds));
  EXPECT_EQ(reduced.rows(), 3);
}

TEST(Lp, ReportsUnboundedAndInfeasible) {
  EXPECT_EQ(solve_lp(VectorXd::Ones(1), MatrixXd::Constant(1, 1, -1.0), VectorXd::Zero(1)).status,
            LpStatus::kUnbounded);
  const MatrixXd f = (MatrixXd(2, 1) << 1.0, -1.0).finished();
  const VectorXd g = (VectorXd(2) << -1.0, -1.0).finished();
  EXPECT_EQ(solve_lp(VectorXd::Ones(1), f, g).status, LpStatus::kInfeasible);
}

// ---------------------------------------------------------------------------
// DARE

TEST(Dare, ScalarGoldenRatio) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const MatrixXd p = solve_dare(one, one, one, one);
  EXPECT_NEAR(p(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-12);
  EXPECT_LE(dare_residual(one, one, one, one, p), 1e-12);
}

TEST(Dare, LyapunovWithoutInput) {
  const double a = 0.8, q = 2.0;
  const MatrixXd p = solve_dare(MatrixXd::Constant(1, 1, a), MatrixXd::Zero(1, 1),
                                MatrixXd::Constant(1, 1, q), MatrixXd::Ones(1, 1));
  EXPECT_NEAR(p(0, 0), q / (1.0 - a * a), 1e-10);
}

TEST(Dare, ZeroStateWeightGivesZero) {
  const MatrixXd a = (MatrixXd(2, 2) << 0.5, 0.1, 0.0, 0.7).finished();
  const MatrixXd b = (MatrixXd(2, 1) << 0.0, 1.0).finished();
  const MatrixXd p = solve_dare(a, b, MatrixXd::Zero(2, 2), MatrixXd::Constant(1, 1, 3.0));
  EXPECT_LE(p.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Dare, RandomResidualSmall) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = 1.2 * random_matrix(rng, 4, 4);
    const MatrixXd b = random_matrix(rng, 4, 1);
    const MatrixXd l = random_matrix(rng, 4, 4);
    const MatrixXd q = l * l.transpose() + 0.1 * MatrixXd::Identity(4, 4);
    const MatrixXd r = MatrixXd::Constant(1, 1, 0.5);
    const MatrixXd p = solve_dare(a, b, q, r);
    EXPECT_LE(dare_residual(a, b, q, r, p), 1e-9 * std::max(1.0, p.cwiseAbs().maxCoeff()));
    const MatrixXd k = lqr_gain(a, b, r, p);
    const auto eig = Eigen::EigenSolver<MatrixXd>(a - b * k).eigenvalues();
    EXPECT_LT(eig.cwiseAbs().maxCoeff(), 1.0);
  }
}

// ---------------------------------------------------------------------------
// Polytopes

TEST(Polytope, RobustPreWithIdentityAndNoDisturbance) {
  std::mt19937_64 rng(5);
  const Polytope p(random_matrix(rng, 5, 2), VectorXd::Ones(5));
  const Polytope pre = polytope_robust_pre(p, MatrixXd::Identity(2, 2), VectorXd::Zero(2));
  EXPECT_TRUE(pre.f.isApprox(p.f));
  EXPECT_TRUE(pre.g.isApprox(p.g));
}

TEST(Polytope, IntervalContainment) {
  const auto interval = [](double lo, double hi) {
    return Polytope((MatrixXd(2, 1) << 1.0, -1.0).finished(), (VectorXd(2) << hi, -lo).finished());
  };
  EXPECT_TRUE(polytope_subset(interval(-1, 1), interval(-2, 2)));
  EXPECT_FALSE(polytope_subset(interval(-3, 1), interval(-2, 2)));
}

TEST(Polytope, EmptinessAndChebyshevCenter) {
  const Polytope box = Polytope::symmetric_box(VectorXd::Constant(2, 1.5));
  EXPECT_FALSE(polytope_is_empty(box));
  const auto c = chebyshev_center(box);
  ASSERT_TRUE(c.has_value());
  EXPECT_NEAR(c->second, 1.5, 1e-12);
  const Polytope crossed((MatrixXd(2, 1) << 1.0, -1.0).finished(), (VectorXd(2) << -1.0, -1.0).finished());
  EXPECT_TRUE(polytope_is_empty(crossed));
}

TEST(Polytope, RepeatedPreShrinksUnderStableDynamics) {
  std::mt19937_64 rng(11);
  const MatrixXd a_cl = (MatrixXd(2, 2) << 0.9, 0.4, -0.3, 0.8).finished();
  ASSERT_LT(Eigen::EigenSolver<MatrixXd>(a_cl).eigenvalues().cwiseAbs().maxCoeff(), 1.0);
  const VectorXd w = VectorXd::Constant(2, 0.05);
  Polytope c = Polytope::symmetric_box(VectorXd::Ones(2)).intersect(
      Polytope(random_matrix(rng, 4, 2), VectorXd::Constant(4, 0.9)));
  for (int k = 0; k < 4; ++k) {
    const Polytope next = c.intersect(polytope_robust_pre(c, a_cl, w));
    EXPECT_TRUE(polytope_subset(next, c));
    for (const VectorXd& z : sample_polytope(next, 200, rng)) {
      ASSERT_TRUE(c.contains(z));
      for (int v = 0; v < 4; ++v) {
        const VectorXd wv = (VectorXd(2) << (v & 1 ? 1 : -1) * w(0), (v & 2 ? 1 : -1) * w(1)).finished();
        ASSERT_TRUE(c.contains(a_cl * z + wv, 1e-9));
      }
    }
    c = next;
  }
}
