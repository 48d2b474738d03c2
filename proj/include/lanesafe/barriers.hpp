#pragma once

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Core>

#include "lanesafe/errors.hpp"
#include "lanesafe/road_world.hpp"
#include "lanesafe/vehicle_model.hpp"

namespace lanesafe {

/// Smooth step of the squared obstacle distance d together with its first two
/// derivatives with respect to d.
struct SmoothStep {
  double value = 0.0;
  double slope = 0.0;
  double curvature = 0.0;
};

/**
 * Phi(d) = 0 for d >= delta^2, exp(1 - delta^2 / (delta^2 - d)) for
 * 0 < d < delta^2, and 1 for d <= 0.
 *
 * Every derivative vanishes as d -> delta^2 from below. At d -> 0+ the value
 * reaches 1 but the slope tends to -1/delta^2, so Phi is only C0 there.
 */
inline SmoothStep smooth_step(double d, double detection_radius) {
  if (!(detection_radius > 0.0)) throw DomainError("smooth_step: delta_2 must be positive");
  const double delta_sq = detection_radius * detection_radius;
  SmoothStep out;
  if (d >= delta_sq) return out;
  if (d <= 0.0) {
    out.value = 1.0;
    return out;
  }
  const double gap = delta_sq - d;
  out.value = std::exp(1.0 - delta_sq / gap);
  out.slope = -delta_sq * out.value / (gap * gap);
  out.curvature = -delta_sq * (out.slope / (gap * gap) + 2.0 * out.value / (gap * gap * gap));
  return out;
}

struct BarrierConfig {
  double lane_width = 3.7;      // w_l, m
  double lane_expansion = 0.0;  // e_v, m
  std::optional<Obstacle> obstacle;

  void validate() const {
    if (!(lane_width > 0.0)) throw DomainError("BarrierConfig: lane width must be positive");
    if (!(lane_expansion >= 0.0)) throw DomainError("BarrierConfig: lane expansion must be >= 0");
  }
};

/**
 * Left-lane expansion that makes the left and right barriers sum to the lane
 * width: e_v = w_l / 2 + e_obs. Requires an obstacle offset right of the
 * centerline and a strictly positive result.
 */
inline double lane_expansion_for_sharing(double lane_width, double obstacle_offset) {
  if (!(obstacle_offset < 0.0)) {
    throw DomainError("lane_expansion_for_sharing: obstacle offset must be negative");
  }
  const double ev = 0.5 * lane_width + obstacle_offset;
  if (!(ev > 0.0)) {
    throw DomainError("lane_expansion_for_sharing: expansion must be strictly positive");
  }
  return ev;
}

/// Value and Lie derivatives of one barrier along x' = f + g u.
struct BarrierTerms {
  double h = 0.0;
  double lf_h = 0.0;
  double lf2_h = 0.0;
  double lglf_h = 0.0;
};

struct BarrierEval {
  BarrierTerms left;
  BarrierTerms right;
  double phi = 0.0;
  double phi_slope = 0.0;
  double distance = std::numeric_limits<double>::quiet_NaN();  // d, m^2
};

/// Augmented state (e1, e1', e2, e2', X, Y, s) used for differentiating along
/// the closed-form dynamics.
using AugmentedState = Eigen::Matrix<double, 7, 1>;

inline AugmentedState augment(const ErrorState& x, const GlobalPose& pose) {
  AugmentedState z;
  z << x.e1, x.e1_dot, x.e2, x.e2_dot, pose.x, pose.y, pose.arc_length;
  return z;
}

inline std::pair<ErrorState, GlobalPose> split(const AugmentedState& z, const RoadProfile& road) {
  return {ErrorState{z(0), z(1), z(2), z(3)}, GlobalPose{z(4), z(5), road.heading(z(6)), z(6)}};
}

/// Drift of the augmented dynamics with u = 0.
inline AugmentedState augmented_drift(const AugmentedState& z, const RoadProfile& road,
                                      const LateralModel& model) {
  const Vector4 x = z.head<4>();
  const double yaw_rate = model.speed * road.curvature(z(6));
  const Vector4 dx = model.a * x + model.g * yaw_rate;
  const Eigen::Vector2d vel = global_velocity(z(1), z(2), road.heading(z(6)), model.speed);
  AugmentedState out;
  out << dx, vel, model.speed;
  return out;
}

inline AugmentedState augmented_input_direction(const LateralModel& model) {
  AugmentedState out = AugmentedState::Zero();
  out.head<4>() = model.b;
  return out;
}

inline double lateral_offset(const ErrorState& x) { return x.e1 * std::cos(x.e2); }

/// h_l and h_r at the current state. The smooth step is taken as zero when
/// there is no obstacle.
inline std::pair<double, double> barrier_values(const ErrorState& x, const GlobalPose& pose,
                                                const BarrierConfig& cfg) {
  const double p = lateral_offset(x);
  const double half = 0.5 * cfg.lane_width;
  double phi = 0.0;
  double offset = 0.0;
  if (cfg.obstacle) {
    const Obstacle& o = *cfg.obstacle;
    phi = smooth_step(squared_obstacle_distance(pose.x, pose.y, o), o.detection_radius).value;
    offset = o.barrier_offset;
  }
  const double left = phi * (half - p + cfg.lane_expansion) + (1.0 - phi) * (half - p);
  const double right = phi * (p - offset) + (1.0 - phi) * (half + p);
  return {left, right};
}

/**
 * Barrier values and their Lie derivatives.
 *
 * The barriers depend on (e1, e2) through p = e1 cos e2 and on (X, Y) through
 * Phi(d). Both are differentiated twice along the error dynamics, the
 * kinematics of (X, Y) and s' = v with psi_r' = v kappa(s):
 *
 *   h_l = w/2 - p + e_v Phi,     h_r = w/2 + p - (w/2 + e_obs) Phi.
 */
inline BarrierEval barrier_lie_terms(const ErrorState& x, const GlobalPose& pose,
                                     const RoadProfile& road, const LateralModel& model,
                                     const BarrierConfig& cfg) {
  const double v = model.speed;
  const double c2 = std::cos(x.e2);
  const double s2 = std::sin(x.e2);
  const double yaw_rate = v * road.curvature(pose.arc_length);
  const Vector4 xv = x.vector();
  const double e1_ddot = model.a.row(1).dot(xv) + model.g(1) * yaw_rate;
  const double e2_ddot = model.a.row(3).dot(xv) + model.g(3) * yaw_rate;
  const double b1 = model.b(1);
  const double b3 = model.b(3);

  const double p = x.e1 * c2;
  const double p_dot = x.e1_dot * c2 - x.e1 * s2 * x.e2_dot;
  const double p_ddot = e1_ddot * c2 - 2.0 * x.e1_dot * x.e2_dot * s2 -
                        x.e1 * c2 * x.e2_dot * x.e2_dot - x.e1 * s2 * e2_ddot;
  const double p_dot_input = b1 * c2 - b3 * x.e1 * s2;

  BarrierEval out;
  double phi = 0.0, phi_dot = 0.0, phi_ddot = 0.0, phi_dot_input = 0.0;
  double offset = 0.0;
  if (cfg.obstacle) {
    const Obstacle& o = *cfg.obstacle;
    const double dx = pose.x - o.x;
    const double dy = pose.y - o.y;
    const double theta = x.e2 + pose.heading;
    const double st = std::sin(theta);
    const double ct = std::cos(theta);
    const double lateral = x.e1_dot - v * x.e2;
    const double lateral_dot = e1_ddot - v * x.e2_dot;
    const double theta_dot = x.e2_dot + yaw_rate;
    const double x_dot = v * ct - lateral * st;
    const double y_dot = v * st + lateral * ct;
    const double x_ddot = -v * st * theta_dot - lateral_dot * st - lateral * ct * theta_dot;
    const double y_ddot = v * ct * theta_dot + lateral_dot * ct - lateral * st * theta_dot;

    const double d = dx * dx + dy * dy - o.radius * o.radius;
    const double d_dot = 2.0 * (dx * x_dot + dy * y_dot);
    const double d_ddot = 2.0 * (x_dot * x_dot + y_dot * y_dot) + 2.0 * (dx * x_ddot + dy * y_ddot);
    const double d_dot_input = 2.0 * b1 * (-dx * st + dy * ct);

    const SmoothStep step = smooth_step(d, o.detection_radius);
    phi = step.value;
    phi_dot = step.slope * d_dot;
    phi_ddot = step.curvature * d_dot * d_dot + step.slope * d_ddot;
    phi_dot_input = step.slope * d_dot_input;
    offset = o.barrier_offset;
    out.distance = d;
    out.phi_slope = step.slope;
  }
  out.phi = phi;

  const double half = 0.5 * cfg.lane_width;
  const double ev = cfg.lane_expansion;
  out.left.h = half - p + ev * phi;
  out.left.lf_h = -p_dot + ev * phi_dot;
  out.left.lf2_h = -p_ddot + ev * phi_ddot;
  out.left.lglf_h = -p_dot_input + ev * phi_dot_input;

  const double k = half + offset;
  out.right.h = half + p - k * phi;
  out.right.lf_h = p_dot - k * phi_dot;
  out.right.lf2_h = p_ddot - k * phi_ddot;
  out.right.lglf_h = p_dot_input - k * phi_dot_input;
  return out;
}

}  // namespace lanesafe
