#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lanesafe/errors.hpp"
#include "lanesafe/numerics/rk4.hpp"
#include "lanesafe/vehicle_model.hpp"

namespace lanesafe {

/// Road segment whose curvature varies linearly with arc length.
struct RoadSegment {
  double length = 0.0;           // m
  double curvature_start = 0.0;  // 1/m
  double curvature_end = 0.0;    // 1/m
};

/**
 * Centerline described by piecewise-linear curvature, starting at the origin
 * heading along +X. Heading is available in closed form; positions are
 * integrated with 5-point Gauss-Legendre quadrature between 1 m knots.
 */
class RoadProfile {
 public:
  RoadProfile() = default;

  RoadProfile(std::vector<RoadSegment> segments, double lane_width)
      : segments_(std::move(segments)), lane_width_(lane_width) {
    if (segments_.empty()) throw DomainError("RoadProfile: no segments");
    if (!(lane_width_ > 0.0)) throw DomainError("RoadProfile: lane width must be positive");
    double s = 0.0;
    double heading = 0.0;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const RoadSegment& seg = segments_[i];
      if (!(seg.length > 0.0)) throw DomainError("RoadProfile: segment length must be positive");
      if (i > 0 && std::abs(segments_[i - 1].curvature_end - seg.curvature_start) > 1e-12) {
        throw DomainError("RoadProfile: curvature must be continuous between segments");
      }
      starts_.push_back(s);
      headings_.push_back(heading);
      heading += seg.length * 0.5 * (seg.curvature_start + seg.curvature_end);
      s += seg.length;
    }
    length_ = s;

    const auto knots = static_cast<std::size_t>(std::ceil(length_ / kKnotSpacing)) + 1;
    knot_positions_.reserve(knots);
    Eigen::Vector2d p = Eigen::Vector2d::Zero();
    knot_positions_.push_back(p);
    for (std::size_t k = 1; k < knots; ++k) {
      const double a = static_cast<double>(k - 1) * kKnotSpacing;
      const double b = std::min(static_cast<double>(k) * kKnotSpacing, length_);
      p += integrate_tangent(a, b);
      knot_positions_.push_back(p);
    }
  }

  double length() const { return length_; }
  double lane_width() const { return lane_width_; }
  const std::vector<RoadSegment>& segments() const { return segments_; }

  /// Curvature at s; arguments beyond the ends are clamped.
  double curvature(double s) const {
    const auto [i, local] = locate(s);
    const RoadSegment& seg = segments_[i];
    return seg.curvature_start + (seg.curvature_end - seg.curvature_start) * local / seg.length;
  }

  double curvature_slope(double s) const {
    const auto [i, local] = locate(s);
    const RoadSegment& seg = segments_[i];
    return (seg.curvature_end - seg.curvature_start) / seg.length;
  }

  /// Road heading psi_r(s) = integral of curvature; linear extrapolation past the end.
  double heading(double s) const {
    if (s > length_) return heading(length_) + segments_.back().curvature_end * (s - length_);
    const auto [i, local] = locate(s);
    const RoadSegment& seg = segments_[i];
    const double slope = (seg.curvature_end - seg.curvature_start) / seg.length;
    return headings_[i] + seg.curvature_start * local + 0.5 * slope * local * local;
  }

  Eigen::Vector2d position(double s) const {
    s = std::clamp(s, 0.0, length_);
    const auto k = std::min(static_cast<std::size_t>(s / kKnotSpacing), knot_positions_.size() - 1);
    const double a = static_cast<double>(k) * kKnotSpacing;
    return knot_positions_[k] + integrate_tangent(a, s);
  }

  /// Unit normal pointing to the left of the direction of travel.
  Eigen::Vector2d left_normal(double s) const {
    const double h = heading(s);
    return {-std::sin(h), std::cos(h)};
  }

  double max_abs_curvature() const {
    double out = 0.0;
    for (const auto& seg : segments_) {
      out = std::max({out, std::abs(seg.curvature_start), std::abs(seg.curvature_end)});
    }
    return out;
  }

  double max_abs_curvature_slope() const {
    double out = 0.0;
    for (const auto& seg : segments_) {
      out = std::max(out, std::abs(seg.curvature_end - seg.curvature_start) / seg.length);
    }
    return out;
  }

 private:
  static constexpr double kKnotSpacing = 1.0;

  std::pair<std::size_t, double> locate(double s) const {
    s = std::clamp(s, 0.0, length_);
    auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
    std::size_t i = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
    return {i, s - starts_[i]};
  }

  Eigen::Vector2d integrate_tangent(double a, double b) const {
    static constexpr std::array<double, 5> nodes = {
        0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640, 0.9061798459386640};
    static constexpr std::array<double, 5> weights = {
        0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
        0.2369268850561891};
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    if (b <= a) return sum;
    // Split at segment boundaries so the integrand is smooth on each piece.
    std::vector<double> cuts{a};
    for (double start : starts_) {
      if (start > a && start < b) cuts.push_back(start);
    }
    cuts.push_back(b);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double half = 0.5 * (cuts[c + 1] - cuts[c]);
      const double mid = 0.5 * (cuts[c + 1] + cuts[c]);
      for (std::size_t q = 0; q < nodes.size(); ++q) {
        const double h = heading(mid + half * nodes[q]);
        sum += weights[q] * half * Eigen::Vector2d(std::cos(h), std::sin(h));
      }
    }
    return sum;
  }

  std::vector<RoadSegment> segments_;
  std::vector<double> starts_;
  std::vector<double> headings_;
  std::vector<Eigen::Vector2d> knot_positions_;
  double lane_width_ = 0.0;
  double length_ = 0.0;
};

struct ReferenceSample {
  double heading = 0.0;        // psi_r, rad
  double yaw_rate = 0.0;       // psi_dot_ref, rad/s
  double yaw_rate_step = 0.0;  // change of psi_dot_ref over one MPC sample, rad/s
};

inline ReferenceSample reference_at_arclength(const RoadProfile& road, double s, double speed,
                                              double sample_time) {
  if (s < 0.0 || s > road.length()) {
    throw DomainError("reference_at_arclength: arc length " + std::to_string(s) +
                      " outside [0, " + std::to_string(road.length()) + "]");
  }
  ReferenceSample out;
  out.heading = road.heading(s);
  out.yaw_rate = speed * road.curvature(s);
  out.yaw_rate_step = speed * road.curvature(s + speed * sample_time) - out.yaw_rate;
  return out;
}

/// Assumption-3 style bounds of a road at a given speed and MPC period.
struct ReferenceBounds {
  double max_yaw_rate = 0.0;
  double max_yaw_rate_step = 0.0;
};

inline ReferenceBounds reference_bounds(const RoadProfile& road, double speed, double sample_time) {
  return {speed * road.max_abs_curvature(),
          speed * road.max_abs_curvature_slope() * speed * sample_time};
}

struct GlobalPose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;     // road heading psi_r at the current arc length
  double arc_length = 0.0;  // s
};

/// Inertial velocity of the c.g. from the error state and road heading.
inline Eigen::Vector2d global_velocity(double e1_dot, double e2, double road_heading,
                                       double speed) {
  const double theta = e2 + road_heading;
  const double lateral = e1_dot - speed * e2;
  return {speed * std::cos(theta) - lateral * std::sin(theta),
          speed * std::sin(theta) + lateral * std::cos(theta)};
}

/// Advances (X, Y, s) by one RK4 step with the error state held fixed.
inline GlobalPose propagate_global_pose(const RoadProfile& road, const GlobalPose& pose,
                                        const ErrorState& state, double speed, double dt) {
  using Vec3 = Eigen::Vector3d;
  const auto f = [&](double, const Vec3& z) -> Vec3 {
    const Eigen::Vector2d vel = global_velocity(state.e1_dot, state.e2, road.heading(z(2)), speed);
    return {vel(0), vel(1), speed};
  };
  const Vec3 next = numerics::rk4_step(f, Vec3(pose.x, pose.y, pose.arc_length), 0.0, dt);
  return {next(0), next(1), road.heading(next(2)), next(2)};
}

/// Circular obstacle. `barrier_offset` is the signed lateral position (positive
/// to the left) of the circle's left-most point, i.e. the lateral position the
/// vehicle has to stay left of while passing.
struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.0;
  double barrier_offset = 0.0;   // e_obs
  double detection_radius = 0.0; // delta_2, m
  double arc_length = 0.0;       // s of the point abreast of the center
  double center_offset = 0.0;    // signed lateral offset of the center
};

/**
 * Places an obstacle perpendicular to the centerline at `arc_length`.
 * `detection_distance` is the center-to-center distance at which the
 * obstacle is first detected; delta_2 follows from d = delta_2^2 at that range.
 */
inline Obstacle place_obstacle(const RoadProfile& road, double arc_length, double center_offset,
                               double radius, double detection_distance) {
  if (!(radius > 0.0)) throw DomainError("Obstacle: radius must be positive");
  if (!(center_offset < 0.0)) {
    throw DomainError("Obstacle: center must lie right of the centerline (negative offset)");
  }
  if (arc_length < 0.0 || arc_length > road.length()) {
    throw DomainError("Obstacle: arc length outside the road");
  }
  const double delta_sq = detection_distance * detection_distance - radius * radius;
  if (!(delta_sq > radius * radius)) {
    throw DomainError("Obstacle: detection radius must exceed the obstacle radius");
  }
  const Eigen::Vector2d c = road.position(arc_length) + center_offset * road.left_normal(arc_length);
  Obstacle o;
  o.x = c(0);
  o.y = c(1);
  o.radius = radius;
  o.barrier_offset = center_offset + radius;
  o.detection_radius = std::sqrt(delta_sq);
  o.arc_length = arc_length;
  o.center_offset = center_offset;
  return o;
}

inline double squared_obstacle_distance(double x_car, double y_car, const Obstacle& o) {
  const double dx = x_car - o.x;
  const double dy = y_car - o.y;
  return dx * dx + dy * dy - o.radius * o.radius;
}

/// Latches the first instant at which d <= delta_2^2.
struct DetectionLatch {
  bool detected = false;
  double detection_time = 0.0;

  /// Returns true only on the triggering call.
  bool update(double d, double detection_radius, double t) {
    if (detected) return false;
    if (d <= detection_radius * detection_radius) {
      detected = true;
      detection_time = t;
      return true;
    }
    return false;
  }
};

}  // namespace lanesafe
