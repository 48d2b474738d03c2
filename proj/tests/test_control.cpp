#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "lanesafe/mpc_tracker.hpp"
#include "lanesafe/safety_filter.hpp"
#include "oracles.hpp"

using namespace lanesafe;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kArcCurvature = 1.0 / 1800.0;
constexpr double kFiveDegrees = 5.0 * std::numbers::pi / 180.0;

RoadProfile test_road() {
  return RoadProfile({{200.0, 0.0, 0.0}, {100.0, 0.0, kArcCurvature}, {500.0, kArcCurvature, kArcCurvature}},
                     3.7);
}

FilterContext shared_context(const RoadProfile& road, double offset, double radius, double detection) {
  FilterContext ctx;
  ctx.road = &road;
  ctx.model = build_lateral_model(VehicleParams{});
  ctx.barrier.lane_width = road.lane_width();
  ctx.barrier.obstacle = place_obstacle(road, 350.0, offset, radius, detection);
  ctx.barrier.lane_expansion = 0.5 * road.lane_width() + ctx.barrier.obstacle->barrier_offset;
  return ctx;
}

AugmentedState random_state(std::mt19937_64& rng, const RoadProfile& road, double s_lo, double s_hi) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double s = s_lo + (s_hi - s_lo) * u(rng);
  const ErrorState x{3.0 * u(rng) - 1.5, 2.0 * u(rng) - 1.0, 0.2 * u(rng) - 0.1, 0.6 * u(rng) - 0.3};
  const Eigen::Vector2d p = road.position(s) + x.e1 * road.left_normal(s);
  return augment(x, GlobalPose{p(0), p(1), road.heading(s), s});
}

BarrierEval eval_at(const FilterContext& ctx, const AugmentedState& z) {
  const auto [x, pose] = split(z, *ctx.road);
  return barrier_lie_terms(x, pose, *ctx.road, ctx.model, ctx.barrier);
}

}  // namespace

// ---------------------------------------------------------------------------
// Override laws

TEST(Override, ZeroNumerator) {
  EXPECT_EQ(*esf_override(BarrierTerms{0.0, 0.0, 0.0, -2.0}, 15.0, 15.0), 0.0);
}

TEST(Override, ExponentialSubstitution) {
  EXPECT_NEAR(*esf_override(BarrierTerms{0.0, 0.0, 1.0, -2.0}, 15.0, 15.0), 0.5, 1e-15);
}

TEST(Override, PrescribedTimeSubstitution) {
  EXPECT_NEAR(*ptsf_override(BarrierTerms{1.0, 0.0, 0.0, -1.0}, 1.0, 1.0, 3.0), 4.0, 1e-15);
}

TEST(Override, PrescribedTimeReducesToExponential) {
  const BarrierTerms b{0.7, -0.3, 2.1, 1.9};
  EXPECT_EQ(*ptsf_override(b, 4.0, 6.0, 0.0), *esf_override(b, 4.0, 6.0));
}

TEST(Override, SingularInputGainDropsRow) {
  EXPECT_FALSE(esf_override(BarrierTerms{1.0, 1.0, 1.0, 1e-7}, 1.0, 1.0).has_value());
  EXPECT_FALSE(ptsf_override(BarrierTerms{1.0, 1.0, 1.0, -1e-7}, 1.0, 1.0, 1.0).has_value());
}

TEST(Override, ControlSharingGapConstantGains) {
  const RoadProfile road = test_road();
  const FilterContext ctx = shared_context(road, -0.5, 2.0, 40.0);
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> gain(1.0, 20.0);
  for (int k = 0; k < 1000; ++k) {
    const BarrierEval e = eval_at(ctx, random_state(rng, road, 320.0, 349.0));
    const double c1 = gain(rng), c2 = gain(rng);
    const auto ul = esf_override(e.left, c1, c2);
    const auto ur = esf_override(e.right, c1, c2);
    ASSERT_TRUE(ul && ur);
    const double expected = -c1 * c2 * road.lane_width() / e.left.lglf_h;
    EXPECT_NEAR(*ul - *ur, expected, 1e-8 * std::max(1.0, std::abs(expected)));
  }
}

TEST(Override, ControlSharingGapScheduledGains) {
  const RoadProfile road = test_road();
  const FilterContext ctx = shared_context(road, -0.5, 2.0, 40.0);
  const PrescribedTime pt{0.0, 2.0};
  const BarrierGains initial{1.5, 2.0, 0.0};
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> when(0.0, 1.99);
  for (int k = 0; k < 1000; ++k) {
    const BarrierEval e = eval_at(ctx, random_state(rng, road, 320.0, 349.0));
    const ScheduledGains g = ptsf_gains(pt, initial, when(rng), 1e4);
    const auto ul = ptsf_override(e.left, g.c1, g.c2, g.c1_dot);
    const auto ur = ptsf_override(e.right, g.c1, g.c2, g.c1_dot);
    ASSERT_TRUE(ul && ur);
    const double expected = -(g.c1_dot + g.c1 * g.c2) * road.lane_width() / e.left.lglf_h;
    EXPECT_NEAR(*ul - *ur, expected, 1e-8 * std::max(1.0, std::abs(expected)));
  }
}

// ---------------------------------------------------------------------------
// Prescribed-time schedule and passing time

TEST(PrescribedTime, ScheduleValues) {
  const PrescribedTime pt{3.0, 2.0};
  EXPECT_EQ(pt.mu(3.0), 1.0);
  EXPECT_NEAR(pt.mu(4.0), 4.0, 1e-14);
  EXPECT_THROW(pt.mu(5.0), DomainError);
  EXPECT_THROW(pt.mu(2.9), DomainError);
  for (double t : {3.1, 3.9, 4.7}) {
    const double h = 1e-6;
    EXPECT_NEAR(pt.mu_dot(t), (pt.mu(t + h) - pt.mu(t - h)) / (2 * h), 1e-6 * pt.mu_dot(t));
    EXPECT_NEAR(pt.mu_ddot(t), (pt.mu_dot(t + h) - pt.mu_dot(t - h)) / (2 * h), 1e-6 * pt.mu_ddot(t));
  }
}

TEST(PrescribedTime, GainsStartAtInitialAndRespectCap) {
  const PrescribedTime pt{0.0, 1.0};
  const BarrierGains c0{2.0, 3.0, 5.0};
  const ScheduledGains start = ptsf_gains(pt, c0, 0.0, 100.0);
  EXPECT_EQ(start.c1, 2.0);
  EXPECT_EQ(start.c2, 3.0);
  EXPECT_EQ(start.mu, 1.0);
  for (double t = 0.0; t < 1.0; t += 1e-3) {
    const ScheduledGains g = ptsf_gains(pt, c0, t, 100.0);
    EXPECT_LE(g.c1, 100.0 * c0.c1);
    EXPECT_LE(g.c2, 100.0 * c0.c2);
    EXPECT_LE(g.c3, 100.0 * c0.c3);
    if (g.capped) {
      EXPECT_EQ(g.c1_dot, 0.0);
    }
  }
  EXPECT_TRUE(ptsf_gains(pt, c0, 0.95, 100.0).capped);
}

TEST(PassingTime, StraightRoad) {
  const RoadProfile road({{1000.0, 0.0, 0.0}}, 3.7);
  EXPECT_NEAR(passing_time_for_chord(road, 100.0, 40.0, 20.0), 2.0, 1e-6);
  EXPECT_NEAR(passing_time_for_chord(road, 100.0, 15.0, 20.0), 0.75, 1e-6);
  EXPECT_NEAR(estimate_passing_time(road, 100.0, 140.0, 20.0), 2.0, 1e-6);
  EXPECT_THROW(estimate_passing_time(road, 100.0, 90.0, 20.0), DomainError);
}

TEST(PassingTime, ArcLengthensSlightly) {
  const RoadProfile road({{1000.0, kArcCurvature, kArcCurvature}}, 3.7);
  const double t = passing_time_for_chord(road, 100.0, 40.0, 20.0);
  EXPECT_GT(t, 2.0);
  EXPECT_LT(t, 2.0005);
}

// ---------------------------------------------------------------------------
// Input-constrained barrier

TEST(MarginBarrier, InputMarginTerm) {
  const ScheduledGains g = constant_gains(BarrierGains{2.0, 3.0, 1.0});
  const BarrierTerms b{0.4, 0.2, -0.1, 0.0};
  const double numerator = b.lf2_h + 5.0 * b.lf_h + 6.0 * b.h;
  EXPECT_NEAR(margin_barrier_value(b, g, kFiveDegrees), numerator, 1e-9);
  BarrierTerms steep = b;
  steep.lglf_h = -2.0;
  EXPECT_NEAR(margin_barrier_value(steep, g, 0.0873) - numerator, -0.1746, 1e-12);
  EXPECT_LT(margin_barrier_value(steep, g, 1e12), -1e11);
}

TEST(MarginBarrier, LargeDecayGainMakesConditionPositive) {
  const RoadProfile road = test_road();
  const FilterContext ctx = shared_context(road, -0.7, 1.9, 15.0);
  std::mt19937_64 rng(61);
  std::vector<AugmentedState> samples;
  for (int k = 0; k < 500; ++k) samples.push_back(random_state(rng, road, 336.0, 349.0));
  const IccbfReport report = validate_iccbf(ctx, samples, Side::kRight, BarrierGains{3.0, 3.0, 1e7}, kFiveDegrees);
  ASSERT_GT(report.evaluated, 0u);
  EXPECT_GT(report.min_value, 0.0);
}

TEST(MarginBarrier, ReportedMinimumIsReproducible) {
  const RoadProfile road = test_road();
  const FilterContext ctx = shared_context(road, -0.7, 1.9, 15.0);
  std::mt19937_64 rng(62);
  std::vector<AugmentedState> samples;
  for (int k = 0; k < 500; ++k) samples.push_back(random_state(rng, road, 336.0, 349.0));
  const BarrierGains gains{3.0, 3.0, 50.0};
  const IccbfReport report = validate_iccbf(ctx, samples, Side::kRight, gains, kFiveDegrees);
  ASSERT_GT(report.evaluated, 0u);
  EXPECT_EQ(iccbf_condition(ctx, report.witness, Side::kRight, gains, kFiveDegrees), report.min_value);
}

TEST(MarginBarrier, LieTermsMatchAnalyticWhereObstacleInactive) {
  const RoadProfile road = test_road();
  FilterContext ctx = shared_context(road, -0.7, 1.9, 15.0);
  ctx.barrier.obstacle.reset();
  ctx.barrier.lane_expansion = 0.0;
  // Without the obstacle h_l = w/2 - e1 cos e2; at e2 = e2' = 0 the margin barrier is linear in
  // (e1, e1') plus the constant input margin, so its drift derivative follows from A.
  const LateralModel& m = ctx.model;
  const ErrorState x{0.3, 0.2, 0.0, 0.0};
  const AugmentedState z = augment(x, GlobalPose{50.0, 0.3, 0.0, 50.0});
  const BarrierGains gains{2.0, 3.0, 1.0};
  const MarginBarrier mb = iccbf_margin_barrier(ctx, z, Side::kLeft, constant_gains(gains), kFiveDegrees);
  const Vector4 xdot = m.a * x.vector();
  const Vector4 e1_ddot_row = m.a.row(1).transpose();
  const double expected_lf = -(e1_ddot_row.dot(xdot)) - 5.0 * xdot(1) - 6.0 * xdot(0);
  EXPECT_NEAR(mb.lf, expected_lf, 1e-5 * std::max(1.0, std::abs(expected_lf)));
  const double expected_lg = -e1_ddot_row.dot(m.b) - 5.0 * m.b(1) - 6.0 * m.b(0);
  EXPECT_NEAR(mb.lg, expected_lg, 1e-5 * std::max(1.0, std::abs(expected_lg)));
}

// ---------------------------------------------------------------------------
// Filter QP

TEST(FilterQp, NominalInsideIsKept) {
  const std::vector<InputConstraint> rows = {{1.0, 1.0, true}, {1.0, -1.0, false}};
  const FilterDecision d = assemble_and_solve_filter_qp(0.3, rows, std::nullopt);
  EXPECT_EQ(d.u_safe, 0.3);
  EXPECT_TRUE(d.feasible);
}

TEST(FilterQp, OneSidedProjection) {
  const FilterDecision d = assemble_and_solve_filter_qp(3.0, {{2.0, -1.0, false}}, std::nullopt);
  EXPECT_NEAR(d.u_safe, 2.0, 1e-12);
}

TEST(FilterQp, MatchesClosedFormClamp) {
  std::mt19937_64 rng(71);
  for (int k = 0; k < 1000; ++k) {
    const auto inst = oracle::random_scalar_filter(rng, k % 2 == 0);
    const FilterDecision d = assemble_and_solve_filter_qp(inst.nominal, inst.rows, inst.box);
    ASSERT_TRUE(d.feasible) << k;
    EXPECT_NEAR(d.u_safe, oracle::clamp_projection(inst.nominal, inst.rows, inst.box), 1e-10) << k;
  }
}

TEST(FilterQp, SoftensLaneRowsFirst) {
  // Lane row wants w >= 1, obstacle row wants w <= 0.
  const std::vector<InputConstraint> rows = {{-1.0, 1.0, true}, {0.0, -1.0, false}};
  const FilterDecision d = assemble_and_solve_filter_qp(0.5, rows, std::nullopt);
  EXPECT_FALSE(d.feasible);
  EXPECT_LE(d.u_safe, 1e-9);
  EXPECT_NEAR(d.slack, 1.0, 1e-5);
}

TEST(FilterQp, IdempotentProjection) {
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const std::vector<InputConstraint> rows = {{0.2 + 0.1 * u(rng), 1.0 + u(rng) * 0.5, true},
                                               {0.3, -2.0, false}};
    const double once = assemble_and_solve_filter_qp(u(rng), rows, kFiveDegrees).u_safe;
    EXPECT_NEAR(assemble_and_solve_filter_qp(once, rows, kFiveDegrees).u_safe, once, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Handoff

TEST(Handoff, WeightEndpointsAndSmoothness) {
  EXPECT_EQ(handoff_weight(0.0), 0.0);
  EXPECT_EQ(handoff_weight(1.0), 1.0);
  EXPECT_NEAR(handoff_weight(0.5), 0.5, 1e-15);
  const double h = 1e-4;
  EXPECT_LE(std::abs(handoff_weight(h) - handoff_weight(0.0)) / h, 1e-6);
  EXPECT_LE(std::abs(handoff_weight(1.0) - handoff_weight(1.0 - h)) / h, 1e-6);
  for (double r = 0.0; r < 1.0; r += 0.01) EXPECT_LE(handoff_weight(r), handoff_weight(r + 0.01));
}

TEST(Handoff, BlendStartsAtBoundaryAndEndsAtNominal) {
  const PrescribedTime pt{1.0, 2.0};
  EXPECT_EQ(post_passing_handoff(2.5, pt, 1.0, -0.05, 0.02), 0.02);
  EXPECT_EQ(post_passing_handoff(3.0, pt, 1.0, -0.05, 0.02), -0.05);
  EXPECT_EQ(post_passing_handoff(4.0, pt, 1.0, -0.05, 0.02), 0.02);
  EXPECT_EQ(post_passing_handoff(9.0, pt, 1.0, -0.05, 0.02), 0.02);
}

TEST(SafetyFilter, ReleasedAfterRampWithInactiveLaneRowReturnsNominal) {
  const RoadProfile road({{1000.0, 0.0, 0.0}}, 3.7);
  FilterContext ctx;
  ctx.road = &road;
  ctx.model = build_lateral_model(VehicleParams{});
  ctx.barrier.obstacle = place_obstacle(road, 100.0, -0.5, 2.0, 40.0);
  ctx.barrier.lane_expansion = 0.5 * 3.7 + ctx.barrier.obstacle->barrier_offset;
  FilterConfig cfg;
  cfg.obstacle_law = BarrierLaw::kPtsf;
  cfg.obstacle_gains = {1.5, 2.0, 1.0};
  cfg.mu_cap = 100.0;
  SafetyFilter filter(cfg, ctx);
  const Eigen::Vector2d p = road.position(65.0);
  const FilterStep first = filter.step(0.0, ErrorState{}, GlobalPose{p(0), p(1), 0.0, 65.0}, 0.0);
  EXPECT_TRUE(first.detected_now);
  ASSERT_TRUE(filter.window().has_value());
  const double released = filter.window()->end() + cfg.ramp_duration + 0.1;
  const Eigen::Vector2d q = road.position(200.0);
  const FilterStep later = filter.step(released, ErrorState{}, GlobalPose{q(0), q(1), 0.0, 200.0}, 0.01);
  EXPECT_EQ(later.phase, FilterPhase::kReleased);
  EXPECT_EQ(later.decision.u_safe, 0.01);
}

// ---------------------------------------------------------------------------
// MPC ingredients

TEST(Disturbance, LinearInReferenceStep) {
  const LateralModel m = build_lateral_model(VehicleParams{});
  const DiscreteModel d = discretize_zoh(m, 0.05);
  EXPECT_EQ(steady_state_disturbance_w(d, m, 0.01, 0.01), Vector4::Zero());
  const Vector4 w1 = steady_state_disturbance_w(d, m, 0.0, 1e-4) / 1e-4;
  const Vector4 w2 = steady_state_disturbance_w(d, m, 0.003, 0.0027) / -3e-4;
  EXPECT_LE((w1 - w2).cwiseAbs().maxCoeff(), 1e-9 * w1.cwiseAbs().maxCoeff());
  const double bound = 2e-4;
  const Vector4 w = steady_state_disturbance_w(d, m, 0.0, bound);
  const VectorXd half = disturbance_half_widths(d, m, bound);
  const numerics::Polytope box = numerics::Polytope::symmetric_box(half);
  EXPECT_TRUE(box.contains(w, 1e-12));
  EXPECT_LE((w.cwiseAbs() - half).cwiseAbs().maxCoeff(), 1e-18);
}

TEST(Terminal, ScalarGoldenRatioAndDefaultStability) {
  const MatrixXd one = MatrixXd::Ones(1, 1);
  const TerminalIngredients t = terminal_ingredients(one, one, one, one);
  EXPECT_NEAR(t.p(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-12);
  EXPECT_LE(t.residual, 1e-9);

  const LateralModel m = build_lateral_model(VehicleParams{});
  const MpcTracker tracker(m, MpcConfig{});
  EXPECT_LE(tracker.terminal().residual, 1e-9 * std::max(1.0, tracker.terminal().p.cwiseAbs().maxCoeff()));
  const DiscreteModel& d = tracker.discrete();
  EXPECT_LT(spectral_radius(d.a - d.b * tracker.terminal().k), 1.0);
}

TEST(Mica, ScalarFixedPoint) {
  const MatrixXd a = MatrixXd::Constant(1, 1, 0.5), b = MatrixXd::Ones(1, 1), k = MatrixXd::Constant(1, 1, 0.5);
  const MicaResult r = mica_terminal_set(a, b, k, numerics::Polytope::symmetric_box(VectorXd::Ones(1)),
                                         VectorXd::Zero(1));
  ASSERT_TRUE(r.converged);
  ASSERT_FALSE(r.empty);
  for (double e : {-2.0, 0.0, 2.0}) EXPECT_TRUE(r.set.contains(VectorXd::Constant(1, e)));
  for (double e : {-2.01, 2.01}) EXPECT_FALSE(r.set.contains(VectorXd::Constant(1, e)));
}

TEST(Mica, UnboundedAlongGainNullSpace) {
  const MatrixXd a = 0.5 * MatrixXd::Identity(2, 2);
  const MatrixXd b = (MatrixXd(2, 1) << 1.0, 0.0).finished();
  const MatrixXd k = (MatrixXd(1, 2) << 0.5, 0.0).finished();
  const MicaResult r = mica_terminal_set(a, b, k, numerics::Polytope::symmetric_box(VectorXd::Ones(1)),
                                         VectorXd::Zero(2));
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.set.rows(), 2);
  EXPECT_TRUE(r.set.contains((VectorXd(2) << 0.0, 1e6).finished()));
  EXPECT_TRUE(r.set.contains((VectorXd(2) << 2.0, -1e6).finished()));
}

TEST(Mica, DefaultSetIsInvariantUnderDisturbanceVertices) {
  const LateralModel m = build_lateral_model(VehicleParams{});
  const MpcConfig cfg;
  const DiscreteModel d = discretize_zoh(m, cfg.sample_time);
  const TerminalIngredients t = terminal_ingredients(d.a, d.b, cfg.state_weight,
                                                     MatrixXd::Constant(1, 1, cfg.input_weight));
  const numerics::Polytope admissible = admissible_correction_set(m, cfg);
  const VectorXd w = disturbance_half_widths(d, m, cfg.yaw_rate_step_bound);
  const MicaResult r = mica_terminal_set(d.a, d.b, t.k, admissible, w);
  ASSERT_TRUE(r.converged);
  ASSERT_FALSE(r.empty);

  const MatrixXd a_cl = d.a - d.b * t.k;
  std::mt19937_64 rng(81);
  const auto samples = numerics::sample_polytope(r.set, 1000, rng);
  ASSERT_EQ(samples.size(), 1000u);
  for (const VectorXd& e : samples) {
    ASSERT_TRUE(admissible.contains(t.k * e, 1e-9));
    for (int v = 0; v < 16; ++v) {
      VectorXd wv(4);
      for (int j = 0; j < 4; ++j) wv(j) = ((v >> j) & 1 ? 1.0 : -1.0) * w(j);
      ASSERT_TRUE(r.set.contains(a_cl * e - wv, 1e-9));
    }
  }
}

TEST(Mica, SmallerReferenceStepNeverShrinksSet) {
  const LateralModel m = build_lateral_model(VehicleParams{});
  const MpcConfig cfg;
  const DiscreteModel d = discretize_zoh(m, cfg.sample_time);
  const TerminalIngredients t = terminal_ingredients(d.a, d.b, cfg.state_weight,
                                                     MatrixXd::Constant(1, 1, cfg.input_weight));
  const numerics::Polytope admissible = admissible_correction_set(m, cfg);
  const MicaResult big = mica_terminal_set(d.a, d.b, t.k, admissible, disturbance_half_widths(d, m, 4e-4));
  const MicaResult small = mica_terminal_set(d.a, d.b, t.k, admissible, disturbance_half_widths(d, m, 1e-4));
  ASSERT_TRUE(big.converged && small.converged);
  EXPECT_TRUE(numerics::polytope_subset(big.set, small.set));
}

TEST(MpcProblem, ScalarOneStep) {
  MpcProblem p;
  p.a = MatrixXd::Ones(1, 1);
  p.b = MatrixXd::Ones(1, 1);
  p.q = MatrixXd::Ones(1, 1);
  p.r = 1.0;
  p.terminal_weight = MatrixXd::Ones(1, 1);
  p.horizon = 1;
  p.initial = VectorXd::Ones(1);
  p.disturbance = VectorXd::Zero(1);
  const MpcSolution s = solve_mpc_problem(p);
  ASSERT_TRUE(s.feasible);
  EXPECT_NEAR(s.moves(0), -0.5, 1e-12);
  EXPECT_NEAR(s.cost, 1.5, 1e-12);
}

TEST(MpcTracker, OriginOnStraightRoadIsOptimal) {
  MpcTracker tracker(build_lateral_model(VehicleParams{}), MpcConfig{});
  const MpcStep s = tracker.step(Vector4::Zero(), std::vector<double>(31, 0.0));
  ASSERT_TRUE(s.feasible);
  EXPECT_EQ(s.input, 0.0);
  EXPECT_NEAR(s.solution.cost, 0.0, 1e-15);
}

TEST(MpcTracker, TighterInputLimitNeverLowersCost) {
  const LateralModel m = build_lateral_model(VehicleParams{});
  const Vector4 state(1.2, 0.3, 0.05, 0.0);
  double previous = -1.0;
  for (double degrees : {10.0, 5.0, 2.0}) {
    MpcConfig cfg;
    cfg.input_limit = degrees * std::numbers::pi / 180.0;
    MpcTracker tracker(m, cfg);
    const MpcStep s = tracker.step(state, std::vector<double>(31, 0.005));
    ASSERT_TRUE(s.feasible);
    EXPECT_GE(s.solution.cost, previous - 1e-9);
    EXPECT_LE(std::abs(s.input), cfg.input_limit + 1e-9);
    previous = s.solution.cost;
  }
}

TEST(MpcTracker, HardTerminalSetBuilds) {
  MpcConfig cfg;
  cfg.terminal = TerminalMode::kHardSet;
  const MpcTracker tracker(build_lateral_model(VehicleParams{}), cfg);
  ASSERT_TRUE(tracker.terminal_set().has_value());
  EXPECT_FALSE(numerics::polytope_is_empty(*tracker.terminal_set()));
  EXPECT_TRUE(tracker.terminal_set()->contains(VectorXd::Zero(4)));
}
