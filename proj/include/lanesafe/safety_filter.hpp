#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lanesafe/barriers.hpp"
#include "lanesafe/errors.hpp"
#include "lanesafe/numerics/qp.hpp"
#include "lanesafe/road_world.hpp"
#include "lanesafe/vehicle_model.hpp"

namespace lanesafe {

enum class BarrierLaw { kEsf, kPtsf, kIccbf, kPtIccbf };

inline const char* to_string(BarrierLaw law) {
  switch (law) {
    case BarrierLaw::kEsf: return "esf";
    case BarrierLaw::kPtsf: return "ptsf";
    case BarrierLaw::kIccbf: return "iccbf";
    case BarrierLaw::kPtIccbf: return "pticcbf";
  }
  return "?";
}

inline bool is_prescribed_time(BarrierLaw law) {
  return law == BarrierLaw::kPtsf || law == BarrierLaw::kPtIccbf;
}
inline bool is_input_constrained(BarrierLaw law) {
  return law == BarrierLaw::kIccbf || law == BarrierLaw::kPtIccbf;
}

struct BarrierGains {
  double c1 = 15.0;  // 1/s
  double c2 = 15.0;  // 1/s
  double c3 = 15.0;  // 1/s, input-constrained laws only
};

struct FilterConfig {
  BarrierLaw lane_law = BarrierLaw::kEsf;      // left barrier
  BarrierLaw obstacle_law = BarrierLaw::kEsf;  // right barrier
  BarrierGains lane_gains;
  BarrierGains obstacle_gains;  // initial gains for prescribed-time laws
  std::optional<double> input_limit;  // u_max, rad
  double mu_cap = 1e4;
  double ramp_duration = 1.0;  // s
  double singularity_threshold = 1e-6;
  double slack_weight = 1e6;
  double difference_step = 1e-6;

  void validate() const {
    if (lane_law != BarrierLaw::kEsf && lane_law != BarrierLaw::kIccbf) {
      throw ConfigError("FilterConfig: lane law must be esf or iccbf");
    }
    for (const BarrierGains* g : {&lane_gains, &obstacle_gains}) {
      if (!(g->c1 > 0.0 && g->c2 > 0.0 && g->c3 > 0.0)) {
        throw ConfigError("FilterConfig: gains must be positive");
      }
    }
    if (input_limit && !(*input_limit > 0.0)) {
      throw ConfigError("FilterConfig: input limit must be positive");
    }
    if ((is_input_constrained(lane_law) || is_input_constrained(obstacle_law)) && !input_limit) {
      throw ConfigError("FilterConfig: input-constrained laws need an input limit");
    }
    if (!(mu_cap > 1.0)) throw ConfigError("FilterConfig: mu cap must exceed 1");
    if (!(ramp_duration > 0.0)) throw ConfigError("FilterConfig: ramp duration must be positive");
    if (!(singularity_threshold > 0.0)) {
      throw ConfigError("FilterConfig: singularity threshold must be positive");
    }
    if (!(slack_weight > 0.0)) throw ConfigError("FilterConfig: slack weight must be positive");
  }
};

// ---------------------------------------------------------------------------
// Override laws

/// Exponential-safety override. Empty when |L_g L_f h| is at or below the
/// singularity threshold.
inline std::optional<double> esf_override(const BarrierTerms& b, double c1, double c2,
                                          double threshold = 1e-6) {
  if (std::abs(b.lglf_h) <= threshold) return std::nullopt;
  return -(b.lf2_h + (c1 + c2) * b.lf_h + c1 * c2 * b.h) / b.lglf_h;
}

/// Prescribed-time override with time-varying gains c1(t), c2(t) and c1'(t).
inline std::optional<double> ptsf_override(const BarrierTerms& b, double c1, double c2,
                                           double c1_dot, double threshold = 1e-6) {
  if (std::abs(b.lglf_h) <= threshold) return std::nullopt;
  return -(b.lf2_h + (c1 + c2) * b.lf_h + (c1_dot + c1 * c2) * b.h) / b.lglf_h;
}

// ---------------------------------------------------------------------------
// Prescribed time

/// Blow-up schedule mu(t) = (1 - (t - t_obs)/T)^-2 on [t_obs, t_obs + T).
struct PrescribedTime {
  double start = 0.0;     // t_obs, s
  double duration = 0.0;  // T, s

  double end() const { return start + duration; }

  double mu(double t) const { return std::pow(remaining(t), -2.0); }
  double mu_dot(double t) const { return (2.0 / duration) * std::pow(remaining(t), -3.0); }
  double mu_ddot(double t) const {
    return (6.0 / (duration * duration)) * std::pow(remaining(t), -4.0);
  }

 private:
  double remaining(double t) const {
    if (!(duration > 0.0)) throw DomainError("PrescribedTime: duration must be positive");
    if (t < start || t >= end()) {
      throw DomainError("PrescribedTime: t = " + std::to_string(t) + " outside the window");
    }
    return 1.0 - (t - start) / duration;
  }
};

struct ScheduledGains {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c1_dot = 0.0;
  double c2_dot = 0.0;
  double c3_dot = 0.0;
  double c1_ddot = 0.0;
  double mu = 1.0;
  bool capped = false;
};

/// c_j(t) = c_j^0 min(mu(t), mu_cap); derivatives vanish once capped.
inline ScheduledGains ptsf_gains(const PrescribedTime& pt, const BarrierGains& initial, double t,
                                 double mu_cap = 1e4) {
  const double mu = pt.mu(t);
  ScheduledGains g;
  g.capped = mu >= mu_cap;
  g.mu = std::min(mu, mu_cap);
  g.c1 = initial.c1 * g.mu;
  g.c2 = initial.c2 * g.mu;
  g.c3 = initial.c3 * g.mu;
  if (!g.capped) {
    const double mu_dot = pt.mu_dot(t);
    g.c1_dot = initial.c1 * mu_dot;
    g.c2_dot = initial.c2 * mu_dot;
    g.c3_dot = initial.c3 * mu_dot;
    g.c1_ddot = initial.c1 * pt.mu_ddot(t);
  }
  return g;
}

inline ScheduledGains constant_gains(const BarrierGains& g) {
  ScheduledGains out;
  out.c1 = g.c1;
  out.c2 = g.c2;
  out.c3 = g.c3;
  return out;
}

/**
 * Time for the reference path, travelled at `speed`, to cover a chord of
 * length `chord` starting at `s_now`. Bisection to 1e-6 s on [0, 10 chord/v].
 */
inline double passing_time_for_chord(const RoadProfile& road, double s_now, double chord,
                                     double speed) {
  if (!(chord > 0.0) || !(speed > 0.0)) {
    throw DomainError("passing time: distance and speed must be positive");
  }
  const Eigen::Vector2d origin = road.position(s_now);
  const auto gap = [&](double t) {
    const double s = s_now + speed * t;
    if (s > road.length()) return std::numeric_limits<double>::infinity();
    return (road.position(s) - origin).norm() - chord;
  };
  double lo = 0.0;
  double hi = 10.0 * chord / speed;
  if (!(gap(hi) >= 0.0) && std::isfinite(gap(hi))) {
    throw NumericalError("passing time: no root in the search interval");
  }
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) >= 0.0) hi = mid; else lo = mid;
  }
  return hi;
}

/// Passing time towards the point abreast of the obstacle's far edge at
/// arc length `s_end`.
inline double estimate_passing_time(const RoadProfile& road, double s_now, double s_end,
                                    double speed) {
  if (!(s_end > s_now)) throw DomainError("estimate_passing_time: obstacle already passed");
  const double chord = (road.position(s_end) - road.position(s_now)).norm();
  return passing_time_for_chord(road, s_now, chord, speed);
}

// ---------------------------------------------------------------------------
// Input-constrained barrier

inline double smooth_abs(double x, double eps = 1e-9) { return std::sqrt(x * x + eps * eps); }

/// b2 for one side. `gains` may carry c1' for the prescribed-time variant.
inline double margin_barrier_value(const BarrierTerms& b, const ScheduledGains& g,
                                   double input_limit) {
  return b.lf2_h + (g.c1 + g.c2) * b.lf_h + (g.c1_dot + g.c1 * g.c2) * b.h -
         input_limit * smooth_abs(b.lglf_h);
}

struct MarginBarrier {
  double value = 0.0;       // b2
  double lf = 0.0;          // L_f b2
  double lg = 0.0;          // L_g b2
  double time_partial = 0.0;  // d b2 / dt through the gain schedule
};

enum class Side { kLeft, kRight };

inline const BarrierTerms& side_terms(const BarrierEval& e, Side side) {
  return side == Side::kLeft ? e.left : e.right;
}

/// Everything needed to evaluate the barriers away from the current state.
struct FilterContext {
  const RoadProfile* road = nullptr;
  LateralModel model;
  BarrierConfig barrier;
};

/**
 * b2 together with its Lie derivatives, which are taken by central
 * differences of b2 along the drift and input directions of the augmented
 * dynamics.
 */
inline MarginBarrier iccbf_margin_barrier(const FilterContext& ctx, const AugmentedState& z,
                                          Side side, const ScheduledGains& g, double input_limit,
                                          double step = 1e-6) {
  if (!(input_limit > 0.0)) throw DomainError("iccbf_margin_barrier: u_max must be positive");
  const auto value_at = [&](const AugmentedState& zz) {
    const auto [x, pose] = split(zz, *ctx.road);
    const BarrierEval e = barrier_lie_terms(x, pose, *ctx.road, ctx.model, ctx.barrier);
    return margin_barrier_value(side_terms(e, side), g, input_limit);
  };
  const auto [x, pose] = split(z, *ctx.road);
  const BarrierEval e = barrier_lie_terms(x, pose, *ctx.road, ctx.model, ctx.barrier);
  const BarrierTerms& b = side_terms(e, side);
  const AugmentedState f = augmented_drift(z, *ctx.road, ctx.model);
  const AugmentedState u = augmented_input_direction(ctx.model);

  MarginBarrier out;
  out.value = margin_barrier_value(b, g, input_limit);
  out.lf = (value_at(z + step * f) - value_at(z - step * f)) / (2.0 * step);
  out.lg = (value_at(z + step * u) - value_at(z - step * u)) / (2.0 * step);
  out.time_partial = (g.c1_dot + g.c2_dot) * b.lf_h +
                     (g.c1_ddot + g.c1_dot * g.c2 + g.c1 * g.c2_dot) * b.h;
  return out;
}

struct IccbfReport {
  double min_value = std::numeric_limits<double>::infinity();
  AugmentedState witness = AugmentedState::Zero();
  std::size_t evaluated = 0;  // samples inside S_i and {b2 >= 0}
};

/// Left side of the ICCBF condition at one state.
inline double iccbf_condition(const FilterContext& ctx, const AugmentedState& z, Side side,
                              const BarrierGains& gains, double input_limit) {
  const MarginBarrier m = iccbf_margin_barrier(ctx, z, side, constant_gains(gains), input_limit);
  return m.lf + input_limit * std::abs(m.lg) + gains.c3 * m.value;
}

/**
 * Minimizes the ICCBF condition over the samples that lie in the safe set and
 * satisfy b2 >= 0. A negative minimum invalidates the candidate.
 */
inline IccbfReport validate_iccbf(const FilterContext& ctx, const std::vector<AugmentedState>& samples,
                                  Side side, const BarrierGains& gains, double input_limit) {
  IccbfReport report;
  for (const AugmentedState& z : samples) {
    const auto [x, pose] = split(z, *ctx.road);
    const BarrierEval e = barrier_lie_terms(x, pose, *ctx.road, ctx.model, ctx.barrier);
    const BarrierTerms& b = side_terms(e, side);
    if (b.h < 0.0) continue;
    if (margin_barrier_value(b, constant_gains(gains), input_limit) < 0.0) continue;
    ++report.evaluated;
    const double value = iccbf_condition(ctx, z, side, gains, input_limit);
    if (value < report.min_value) {
      report.min_value = value;
      report.witness = z;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Filter QP

/// Affine constraint a + b w >= 0 on the filtered input w.
struct InputConstraint {
  double offset = 0.0;  // a
  double slope = 0.0;   // b
  bool lane = true;     // lane-keeping rows are softened first

  /// Value of w at which the constraint is tight.
  double boundary() const { return -offset / slope; }
};

struct FilterDecision {
  double u_safe = 0.0;
  double u_override_left = std::numeric_limits<double>::quiet_NaN();
  double u_override_right = std::numeric_limits<double>::quiet_NaN();
  bool left_active = false;
  bool right_active = false;
  bool feasible = true;
  double slack = 0.0;
  int singular = 0;  // number of rows dropped for a vanishing L_g L_f h
};

/**
 * u_safe = argmin |w - u_nominal|^2 subject to the barrier constraints and,
 * when `input_limit` is set, |w| <= u_max. On infeasibility the lane rows are
 * softened with a quadratic penalty; if that still fails every barrier row is.
 * The slack is reported in input units.
 */
inline FilterDecision assemble_and_solve_filter_qp(double u_nominal,
                                                   const std::vector<InputConstraint>& rows,
                                                   std::optional<double> input_limit,
                                                   double slack_weight = 1e6) {
  FilterDecision out;
  const int box_rows = input_limit ? 2 : 0;
  const auto solve = [&](bool soften_lane, bool soften_all) {
    const int n = (soften_lane || soften_all) ? 2 : 1;
    numerics::QpProblem p;
    p.hessian = Eigen::MatrixXd::Zero(n, n);
    p.hessian(0, 0) = 2.0;
    if (n == 2) p.hessian(1, 1) = 2.0 * slack_weight;
    p.gradient = Eigen::VectorXd::Zero(n);
    p.gradient(0) = -2.0 * u_nominal;
    const auto m = static_cast<Eigen::Index>(rows.size()) + box_rows;
    p.constraint_matrix = Eigen::MatrixXd::Zero(m, n);
    p.constraint_bound = Eigen::VectorXd::Zero(m);
    Eigen::Index i = 0;
    // Rows are scaled to unit slope so a slack is measured in input units.
    for (const InputConstraint& r : rows) {
      const double scale = r.slope != 0.0 ? 1.0 / std::abs(r.slope) : 1.0;
      p.constraint_matrix(i, 0) = -r.slope * scale;
      if (soften_all || (soften_lane && r.lane)) p.constraint_matrix(i, 1) = -1.0;
      p.constraint_bound(i) = r.offset * scale;
      ++i;
    }
    if (input_limit) {
      p.constraint_matrix(i, 0) = 1.0;
      p.constraint_bound(i++) = *input_limit;
      p.constraint_matrix(i, 0) = -1.0;
      p.constraint_bound(i++) = *input_limit;
    }
    return numerics::solve_qp(p);
  };

  numerics::QpSolution sol = solve(false, false);
  if (!sol.optimal()) {
    out.feasible = false;
    sol = solve(true, false);
    if (!sol.optimal()) sol = solve(false, true);
    if (!sol.optimal()) throw NumericalError("filter QP: softened problem failed");
    out.slack = std::abs(sol.z(1));
  }
  out.u_safe = sol.active_set.empty() ? u_nominal : sol.z(0);
  return out;
}

// ---------------------------------------------------------------------------
// Handoff after the passing time

/// C-infinity step from 0 at r <= 0 to 1 at r >= 1, built from exp(-1/x).
inline double handoff_weight(double r) {
  if (r <= 0.0) return 0.0;
  if (r >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / r);
  const double b = std::exp(-1.0 / (1.0 - r));
  return a / (a + b);
}

/**
 * Nominal input handed to the filter around the passing time: the MPC input
 * inside the window, then a blend from the filtered value frozen at
 * t_obs + T towards the MPC input over the ramp. The blend is filtered by the
 * lane-only constraints, so the barriers stay enforced throughout.
 */
inline double post_passing_handoff(double t, const PrescribedTime& pt, double ramp_duration,
                                   double u_boundary, double u_mpc) {
  if (t < pt.end()) return u_mpc;
  const double sigma = handoff_weight((t - pt.end()) / ramp_duration);
  return sigma * u_mpc + (1.0 - sigma) * u_boundary;
}

// ---------------------------------------------------------------------------
// Stateful filter

enum class FilterPhase { kNominal, kWindow, kRamp, kReleased };

struct FilterStep {
  FilterDecision decision;
  BarrierEval eval;
  FilterPhase phase = FilterPhase::kNominal;
  double mu = std::numeric_limits<double>::quiet_NaN();
  bool detected_now = false;
  bool gain_warning = false;
  double sharing_error = 0.0;  // relative error of the control-sharing identity
};

/**
 * One filter instance per simulation. Tracks detection, the prescribed-time
 * window and the handoff state.
 */
class SafetyFilter {
 public:
  SafetyFilter(FilterConfig cfg, FilterContext ctx) : cfg_(std::move(cfg)), ctx_(std::move(ctx)) {
    cfg_.validate();
    ctx_.barrier.validate();
    if (ctx_.road == nullptr) throw DomainError("SafetyFilter: missing road");
  }

  const FilterConfig& config() const { return cfg_; }
  const FilterContext& context() const { return ctx_; }
  const DetectionLatch& detection() const { return latch_; }
  const std::optional<PrescribedTime>& window() const { return window_; }

  /// Latches detection, opens the prescribed-time window and evaluates the
  /// filter. The held state (latch, window, boundary input) changes only here.
  FilterStep step(double t, const ErrorState& x, const GlobalPose& pose, double u_nominal) {
    const BarrierEval eval = barrier_lie_terms(x, pose, *ctx_.road, ctx_.model, ctx_.barrier);
    bool detected_now = false;
    bool warning = false;
    const auto& obstacle = ctx_.barrier.obstacle;
    if (obstacle && latch_.update(eval.distance, obstacle->detection_radius, t)) {
      detected_now = true;
      warning = !gains_admissible(eval);
      if (is_prescribed_time(cfg_.obstacle_law)) {
        const double duration = estimate_passing_time(
            *ctx_.road, pose.arc_length, obstacle->arc_length + obstacle->radius, ctx_.model.speed);
        window_ = PrescribedTime{t, duration};
      }
    }
    FilterStep out = solve(t, x, pose, u_nominal, eval);
    out.detected_now = detected_now;
    out.gain_warning = warning;
    if (out.phase == FilterPhase::kWindow) boundary_input_ = out.decision.u_safe;
    return out;
  }

  /// Filter output at an arbitrary (t, state) with the held state frozen.
  /// Used between steps so the closed loop is integrated as a state feedback.
  FilterStep evaluate(double t, const ErrorState& x, const GlobalPose& pose,
                      double u_nominal) const {
    return solve(t, x, pose, u_nominal,
                 barrier_lie_terms(x, pose, *ctx_.road, ctx_.model, ctx_.barrier));
  }

 private:
  FilterStep solve(double t, const ErrorState& x, const GlobalPose& pose, double u_nominal,
                   const BarrierEval& eval) const {
    FilterStep out;
    out.eval = eval;
    out.phase = phase(t);
    const AugmentedState z = augment(x, pose);
    std::vector<InputConstraint> rows;
    out.decision.singular = 0;
    add_row(rows, out, z, Side::kLeft, cfg_.lane_law, constant_gains(cfg_.lane_gains));

    if (out.phase == FilterPhase::kWindow) {
      const ScheduledGains g = ptsf_gains(*window_, cfg_.obstacle_gains, t, cfg_.mu_cap);
      out.mu = g.mu;
      add_row(rows, out, z, Side::kRight, cfg_.obstacle_law, g);
    } else if (is_prescribed_time(cfg_.obstacle_law)) {
      add_row(rows, out, z, Side::kRight, cfg_.lane_law, constant_gains(cfg_.lane_gains));
    } else {
      add_row(rows, out, z, Side::kRight, cfg_.obstacle_law, constant_gains(cfg_.obstacle_gains));
    }

    const bool constrained =
        is_input_constrained(cfg_.lane_law) || is_input_constrained(cfg_.obstacle_law);
    const std::optional<double> box = constrained ? cfg_.input_limit : std::nullopt;
    const double nominal =
        out.phase == FilterPhase::kRamp
            ? post_passing_handoff(t, *window_, cfg_.ramp_duration, boundary_input_, u_nominal)
            : u_nominal;
    FilterDecision qp = assemble_and_solve_filter_qp(nominal, rows, box, cfg_.slack_weight);
    out.decision.u_safe = qp.u_safe;
    out.decision.feasible = qp.feasible;
    out.decision.slack = qp.slack;
    for (const InputConstraint& r : rows) {
      const bool tight = std::abs(r.offset + r.slope * qp.u_safe) <= 1e-9 * (1.0 + std::abs(r.offset));
      if (r.lane) out.decision.left_active = out.decision.left_active || tight;
      else out.decision.right_active = out.decision.right_active || tight;
    }
    out.sharing_error = sharing_error(out);
    return out;
  }

  FilterPhase phase(double t) const {
    if (!window_) return FilterPhase::kNominal;
    if (t < window_->end()) return FilterPhase::kWindow;
    if (t < window_->end() + cfg_.ramp_duration) return FilterPhase::kRamp;
    return FilterPhase::kReleased;
  }

  void add_row(std::vector<InputConstraint>& rows, FilterStep& out, const AugmentedState& z,
               Side side, BarrierLaw law, const ScheduledGains& g) const {
    const BarrierTerms& b = side_terms(out.eval, side);
    const bool lane = side == Side::kLeft;
    double& override_value = lane ? out.decision.u_override_left : out.decision.u_override_right;
    if (std::abs(b.lglf_h) <= cfg_.singularity_threshold) {
      ++out.decision.singular;
      return;
    }
    InputConstraint row;
    row.lane = lane;
    if (is_input_constrained(law)) {
      const MarginBarrier m =
          iccbf_margin_barrier(ctx_, z, side, g, *cfg_.input_limit, cfg_.difference_step);
      row.offset = m.lf + m.time_partial + g.c3 * m.value;
      row.slope = m.lg;
      if (std::abs(row.slope) <= cfg_.singularity_threshold) {
        ++out.decision.singular;
        return;
      }
    } else {
      row.offset = b.lf2_h + (g.c1 + g.c2) * b.lf_h + (g.c1_dot + g.c1 * g.c2) * b.h;
      row.slope = b.lglf_h;
    }
    override_value = row.boundary();
    rows.push_back(row);
  }

  bool gains_admissible(const BarrierEval& e) const {
    const auto ok = [](const BarrierTerms& b, double c1) {
      return b.h > 0.0 && c1 > std::max(0.0, -b.lf_h / b.h);
    };
    return ok(e.left, cfg_.lane_gains.c1) && ok(e.right, cfg_.obstacle_gains.c1);
  }

  /// Relative error of u_l - u_r = -(c1' + c1 c2) w / L_g L_f h_l, evaluated
  /// only when both sides use the same non-input-constrained law and gains
  /// and the expansion shares the lane.
  double sharing_error(const FilterStep& out) const {
    const auto& o = ctx_.barrier.obstacle;
    if (!o || is_input_constrained(cfg_.lane_law) || is_input_constrained(cfg_.obstacle_law)) {
      return 0.0;
    }
    if (out.phase == FilterPhase::kWindow || cfg_.obstacle_law != cfg_.lane_law) return 0.0;
    if (cfg_.lane_gains.c1 != cfg_.obstacle_gains.c1 ||
        cfg_.lane_gains.c2 != cfg_.obstacle_gains.c2) {
      return 0.0;
    }
    if (std::abs(ctx_.barrier.lane_expansion - (0.5 * ctx_.barrier.lane_width + o->barrier_offset)) >
        1e-12) {
      return 0.0;
    }
    const double gap = out.decision.u_override_left - out.decision.u_override_right;
    if (!std::isfinite(gap)) return 0.0;
    const double expected =
        -cfg_.lane_gains.c1 * cfg_.lane_gains.c2 * ctx_.barrier.lane_width / out.eval.left.lglf_h;
    return std::abs(gap - expected) / std::max(1.0, std::abs(expected));
  }

  FilterConfig cfg_;
  FilterContext ctx_;
  DetectionLatch latch_;
  std::optional<PrescribedTime> window_;
  double boundary_input_ = 0.0;
};

}  // namespace lanesafe
