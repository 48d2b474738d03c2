#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "lanesafe/errors.hpp"
#include "lanesafe/numerics/expm.hpp"

namespace lanesafe {

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;

/// Physical parameters of the single-track (bicycle) model. Cornering
/// stiffnesses are per axle.
struct VehicleParams {
  double mass = 1600.0;              // kg
  double yaw_inertia = 2500.0;       // kg m^2
  double front_axle = 1.2;           // m, c.g. to front axle
  double rear_axle = 1.4;            // m, c.g. to rear axle
  double front_stiffness = 80000.0;  // N/rad
  double rear_stiffness = 80000.0;   // N/rad
  double speed = 20.0;               // m/s, constant longitudinal velocity

  double wheelbase() const { return front_axle + rear_axle; }

  void validate() const {
    const auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw DomainError(std::string("VehicleParams: ") + name + " must be positive and finite");
      }
    };
    positive(mass, "mass");
    positive(yaw_inertia, "yaw_inertia");
    positive(front_axle, "front_axle");
    positive(rear_axle, "rear_axle");
    positive(front_stiffness, "front_stiffness");
    positive(rear_stiffness, "rear_stiffness");
    positive(speed, "speed");
  }
};

/// Error state x = [e1, e1', e2, e2'] relative to the road centerline.
struct ErrorState {
  double e1 = 0.0;
  double e1_dot = 0.0;
  double e2 = 0.0;
  double e2_dot = 0.0;

  Vector4 vector() const { return {e1, e1_dot, e2, e2_dot}; }
  static ErrorState from(const Vector4& x) { return {x(0), x(1), x(2), x(3)}; }
};

/// Continuous lateral error dynamics x' = A x + B u + G psi_dot_ref.
struct LateralModel {
  Matrix4 a;
  Vector4 b;
  Vector4 g;
  double speed = 0.0;
  double understeer_gradient = 0.0;  // k_v, rad s^2/m
  double rear_slip_coefficient = 0.0;  // alpha_r, s (rear slip per unit yaw rate)
  double front_axle = 0.0;
  double rear_axle = 0.0;

  /// Steady-state input per unit reference yaw rate.
  double unit_steady_input() const {
    return (front_axle + rear_axle) / speed + understeer_gradient * speed;
  }
  /// Steady-state error per unit reference yaw rate (only e2 is nonzero).
  Vector4 unit_steady_state() const {
    return {0.0, 0.0, -rear_axle / speed + rear_slip_coefficient, 0.0};
  }
};

struct DiscreteModel {
  Matrix4 a;
  Vector4 b;
  Vector4 g;
  double sample_time = 0.0;
};

/**
 * Error-frame lateral dynamics of a single-track vehicle at constant speed
 * (Rajamani, Vehicle Dynamics and Control, ch. 2), with per-axle stiffnesses.
 */
inline LateralModel build_lateral_model(const VehicleParams& p) {
  p.validate();
  const double m = p.mass;
  const double iz = p.yaw_inertia;
  const double lf = p.front_axle;
  const double lr = p.rear_axle;
  const double cf = p.front_stiffness;
  const double cr = p.rear_stiffness;
  const double v = p.speed;

  LateralModel model;
  model.a.setZero();
  model.a(0, 1) = 1.0;
  model.a(1, 1) = -(cf + cr) / (m * v);
  model.a(1, 2) = (cf + cr) / m;
  model.a(1, 3) = (-cf * lf + cr * lr) / (m * v);
  model.a(2, 3) = 1.0;
  model.a(3, 1) = -(cf * lf - cr * lr) / (iz * v);
  model.a(3, 2) = (cf * lf - cr * lr) / iz;
  model.a(3, 3) = -(cf * lf * lf + cr * lr * lr) / (iz * v);

  model.b << 0.0, cf / m, 0.0, cf * lf / iz;
  model.g << 0.0, -(cf * lf - cr * lr) / (m * v) - v, 0.0,
      -(cf * lf * lf + cr * lr * lr) / (iz * v);

  const double wheelbase = lf + lr;
  model.speed = v;
  model.front_axle = lf;
  model.rear_axle = lr;
  model.understeer_gradient = m * lr / (cf * wheelbase) - m * lf / (cr * wheelbase);
  model.rear_slip_coefficient = m * lf * v / (cr * wheelbase);
  if (!std::isfinite(model.understeer_gradient) || !std::isfinite(model.rear_slip_coefficient)) {
    throw DomainError("build_lateral_model: derived coefficients are not finite");
  }
  return model;
}

struct SteadyState {
  Vector4 state;
  double input = 0.0;
};

/// Yaw-rate dependent equilibrium (x_s, u_s) of the lateral model.
inline SteadyState steady_state_tuple(const LateralModel& model, double psi_dot_ref) {
  return {psi_dot_ref * model.unit_steady_state(), psi_dot_ref * model.unit_steady_input()};
}

/// Zero-order-hold discretization of x' = A x + B u (B may have several
/// columns) through the exponential of the augmented matrix [[A, B], [0, 0]].
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_zoh(const Eigen::MatrixXd& a,
                                                                 const Eigen::MatrixXd& b,
                                                                 double sample_time) {
  if (!(sample_time > 0.0)) throw DomainError("discretize_zoh: sample time must be positive");
  const Eigen::Index n = a.rows();
  const Eigen::Index k = b.cols();
  Eigen::MatrixXd augmented = Eigen::MatrixXd::Zero(n + k, n + k);
  augmented.topLeftCorner(n, n) = a;
  augmented.topRightCorner(n, k) = b;
  const Eigen::MatrixXd phi = numerics::matrix_exponential(augmented * sample_time);
  return {phi.topLeftCorner(n, n), phi.topRightCorner(n, k)};
}

inline DiscreteModel discretize_zoh(const LateralModel& model, double sample_time) {
  Eigen::MatrixXd inputs(4, 2);
  inputs << model.b, model.g;
  const auto [ad, bd] = discretize_zoh(model.a, inputs, sample_time);
  DiscreteModel out;
  out.a = ad;
  out.b = bd.col(0);
  out.g = bd.col(1);
  out.sample_time = sample_time;
  return out;
}

}  // namespace lanesafe
