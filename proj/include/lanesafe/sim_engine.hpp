#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lanesafe/barriers.hpp"
#include "lanesafe/errors.hpp"
#include "lanesafe/mpc_tracker.hpp"
#include "lanesafe/numerics/rk4.hpp"
#include "lanesafe/road_world.hpp"
#include "lanesafe/safety_filter.hpp"
#include "lanesafe/vehicle_model.hpp"

namespace lanesafe {

enum class Saturation { kNone, kHardClip };

struct SimConfig {
  double duration = 30.0;     // s
  double fine_step = 1e-3;    // s
  Saturation saturation = Saturation::kNone;
  bool filter_enabled = true;
  ErrorState initial_state;
  double initial_arc_length = 0.0;  // m
  std::uint64_t seed = 0;

  /// Fine steps per MPC sample; throws unless the ratio is an integer.
  int steps_per_sample(double sample_time) const {
    const double ratio = sample_time / fine_step;
    const long rounded = std::lround(ratio);
    if (rounded < 1 || std::abs(ratio - static_cast<double>(rounded)) > 1e-9 * ratio) {
      throw ConfigError("SimConfig: MPC period must be an integer multiple of the fine step");
    }
    return static_cast<int>(rounded);
  }

  long step_count() const {
    const double ratio = duration / fine_step;
    const long rounded = std::lround(ratio);
    if (!(duration > 0.0) || !(fine_step > 0.0) ||
        std::abs(ratio - static_cast<double>(rounded)) > 1e-9 * ratio) {
      throw ConfigError("SimConfig: duration must be a positive multiple of the fine step");
    }
    return rounded;
  }
};

struct ObstacleSpec {
  double arc_length = 0.0;
  double center_offset = 0.0;
  double radius = 0.0;
  double detection_distance = 0.0;
};

/// Everything that defines one closed-loop run.
struct Scenario {
  std::string name = "scenario";
  VehicleParams vehicle;
  double lane_width = 3.7;
  std::vector<RoadSegment> segments;
  std::optional<ObstacleSpec> obstacle;
  std::optional<double> lane_expansion;  // empty: w_l/2 + e_obs when an obstacle exists
  FilterConfig filter;
  MpcConfig mpc;
  SimConfig sim;
};

/// Resolved objects built from a scenario.
struct ScenarioSetup {
  RoadProfile road;
  LateralModel model;
  BarrierConfig barrier;
};

inline ScenarioSetup build_setup(const Scenario& sc) {
  ScenarioSetup out;
  out.road = RoadProfile(sc.segments, sc.lane_width);
  out.model = build_lateral_model(sc.vehicle);
  out.barrier.lane_width = sc.lane_width;
  if (sc.obstacle) {
    const ObstacleSpec& o = *sc.obstacle;
    out.barrier.obstacle =
        place_obstacle(out.road, o.arc_length, o.center_offset, o.radius, o.detection_distance);
    out.barrier.lane_expansion =
        sc.lane_expansion.value_or(0.5 * sc.lane_width + out.barrier.obstacle->barrier_offset);
  } else {
    out.barrier.lane_expansion = sc.lane_expansion.value_or(0.0);
  }
  if (!(out.barrier.lane_expansion >= 0.0)) {
    throw ConfigError("lane expansion must be nonnegative");
  }
  out.barrier.validate();
  return out;
}

/// One logged instant. Field order matches the CSV columns.
struct SimRow {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double s = 0.0;
  double e1 = 0.0;
  double e1_dot = 0.0;
  double e2 = 0.0;
  double e2_dot = 0.0;
  double road_heading = 0.0;
  double yaw_rate_ref = 0.0;
  double u_steady = 0.0;
  double u_mpc = 0.0;
  double u_override_left = 0.0;
  double u_override_right = 0.0;
  double u_safe = 0.0;
  double u_applied = 0.0;
  double h_left = 0.0;
  double h_right = 0.0;
  double distance = 0.0;
  double phi = 0.0;
  double mu = 0.0;
  int detected = 0;
  int feasible_mpc = 1;
  int feasible_filter = 1;
  double slack = 0.0;
  long singularity_count = 0;
};

inline constexpr std::array<const char*, 26> kLogColumns = {
    "t", "X", "Y", "s", "e1", "ė1", "e2", "ė2", "ψ_r", "ψ̇_ref", "u_s", "u_mpc",
    "u_override_ℓ", "u_override_r", "u_safe", "u_applied", "h_ℓ", "h_r", "d", "Φ", "μ₂",
    "detected", "feasible_mpc", "feasible_filter", "slack", "singularity_count"};

struct SimSummary {
  double min_h_left = std::numeric_limits<double>::infinity();
  double min_h_right = std::numeric_limits<double>::infinity();
  double min_distance = std::numeric_limits<double>::infinity();
  double peak_override = 0.0;  // max |u_safe - u_mpc|
  double max_lateral_offset = 0.0;  // max |e1 cos e2|
  double max_sharing_error = 0.0;
  long filter_infeasible = 0;
  long mpc_infeasible = 0;
  long singularities = 0;
  bool gain_warning = false;
  double detection_time = std::numeric_limits<double>::quiet_NaN();
  double passing_time = std::numeric_limits<double>::quiet_NaN();  // t_obs + T
};

struct SimLog {
  std::vector<SimRow> rows;
  SimSummary summary;
};

inline SimSummary summarize(const std::vector<SimRow>& rows) {
  SimSummary s;
  for (const SimRow& r : rows) {
    s.min_h_left = std::min(s.min_h_left, r.h_left);
    s.min_h_right = std::min(s.min_h_right, r.h_right);
    if (std::isfinite(r.distance)) s.min_distance = std::min(s.min_distance, r.distance);
    s.peak_override = std::max(s.peak_override, std::abs(r.u_safe - r.u_mpc));
    s.max_lateral_offset = std::max(s.max_lateral_offset, std::abs(r.e1 * std::cos(r.e2)));
    s.filter_infeasible += r.feasible_filter == 0 ? 1 : 0;
    s.singularities = std::max(s.singularities, r.singularity_count);
    if (r.detected && !std::isfinite(s.detection_time)) s.detection_time = r.t;
  }
  // MPC infeasibility is counted once per sample, not per fine step.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].feasible_mpc == 0 && (i == 0 || rows[i - 1].feasible_mpc != 0 ||
                                      rows[i].u_mpc != rows[i - 1].u_mpc)) {
      ++s.mpc_infeasible;
    }
  }
  return s;
}

/**
 * Closed-loop run: MPC at its sample rate with zero-order hold, and RK4
 * integration of the error dynamics together with the global pose. The safety
 * filter and optional saturation are applied at every integrator stage; the
 * logged inputs are the values at the start of each fine step.
 */
inline SimLog simulate_scenario(const Scenario& sc) {
  const ScenarioSetup setup = build_setup(sc);
  const RoadProfile& road = setup.road;
  const LateralModel& model = setup.model;
  const double v = model.speed;
  const double dt = sc.sim.fine_step;
  const long steps = sc.sim.step_count();
  const int per_sample = sc.sim.steps_per_sample(sc.mpc.sample_time);

  MpcTracker mpc(model, sc.mpc);
  SafetyFilter filter(sc.filter, FilterContext{&road, model, setup.barrier});

  AugmentedState z;
  {
    const double s0 = sc.sim.initial_arc_length;
    const Eigen::Vector2d p0 = road.position(s0) + sc.sim.initial_state.e1 * road.left_normal(s0);
    z << sc.sim.initial_state.vector(), p0, s0;
  }

  const auto yaw_rate_at = [&](double s) { return v * road.curvature(std::min(s, road.length())); };

  SimLog log;
  log.rows.reserve(static_cast<std::size_t>(steps) + 1);
  MpcStep held;
  long singularities = 0;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const auto [x, pose] = split(z, road);
    if (!z.allFinite()) throw NumericalError("simulate_scenario: state is not finite");

    if (k % per_sample == 0) {
      std::vector<double> preview;
      for (int i = 0; i <= sc.mpc.horizon; ++i) {
        preview.push_back(yaw_rate_at(pose.arc_length + v * sc.mpc.sample_time * i));
      }
      held = mpc.step(x.vector(), preview);
    }

    SimRow row;
    double u_safe = held.input;
    if (sc.sim.filter_enabled) {
      const FilterStep fs = filter.step(t, x, pose, held.input);
      u_safe = fs.decision.u_safe;
      singularities += fs.decision.singular;
      row.u_override_left = fs.decision.u_override_left;
      row.u_override_right = fs.decision.u_override_right;
      row.h_left = fs.eval.left.h;
      row.h_right = fs.eval.right.h;
      row.distance = fs.eval.distance;
      row.phi = fs.eval.phi;
      row.mu = fs.mu;
      row.feasible_filter = fs.decision.feasible ? 1 : 0;
      row.slack = fs.decision.slack;
      row.detected = filter.detection().detected ? 1 : 0;
      log.summary.max_sharing_error = std::max(log.summary.max_sharing_error, fs.sharing_error);
      log.summary.gain_warning = log.summary.gain_warning || fs.gain_warning;
    } else {
      const BarrierEval e = barrier_lie_terms(x, pose, road, model, setup.barrier);
      row.u_override_left = row.u_override_right = std::numeric_limits<double>::quiet_NaN();
      row.h_left = e.left.h;
      row.h_right = e.right.h;
      row.distance = e.distance;
      row.phi = e.phi;
      row.mu = std::numeric_limits<double>::quiet_NaN();
      row.detected = (setup.barrier.obstacle &&
                      e.distance <= std::pow(setup.barrier.obstacle->detection_radius, 2))
                         ? 1
                         : 0;
      if (k > 0 && log.rows.back().detected) row.detected = 1;
    }
    double u_applied = u_safe;
    if (sc.sim.saturation == Saturation::kHardClip) {
      u_applied = std::clamp(u_safe, -sc.mpc.input_limit, sc.mpc.input_limit);
    }

    row.t = t;
    row.x = z(4);
    row.y = z(5);
    row.s = z(6);
    row.e1 = z(0);
    row.e1_dot = z(1);
    row.e2 = z(2);
    row.e2_dot = z(3);
    row.road_heading = pose.heading;
    row.yaw_rate_ref = yaw_rate_at(pose.arc_length);
    row.u_steady = held.steady_input;
    row.u_mpc = held.input;
    row.u_safe = u_safe;
    row.u_applied = u_applied;
    row.feasible_mpc = held.feasible ? 1 : 0;
    row.singularity_count = singularities;
    log.rows.push_back(row);

    if (k == steps) break;
    // The filter is a state feedback inside the integrator; the MPC input is held.
    const AugmentedState input = augmented_input_direction(model);
    const auto dynamics = [&](double tt, const AugmentedState& zz) -> AugmentedState {
      double u = u_applied;
      if (sc.sim.filter_enabled && (tt != t || zz != z)) {
        const auto [xs, ps] = split(zz, road);
        u = filter.evaluate(tt, xs, ps, held.input).decision.u_safe;
        if (sc.sim.saturation == Saturation::kHardClip) {
          u = std::clamp(u, -sc.mpc.input_limit, sc.mpc.input_limit);
        }
      }
      return augmented_drift(zz, road, model) + input * u;
    };
    z = numerics::rk4_step(dynamics, z, t, dt);
  }

  const SimSummary partial = log.summary;
  log.summary = summarize(log.rows);
  log.summary.max_sharing_error = partial.max_sharing_error;
  log.summary.gain_warning = partial.gain_warning;
  if (filter.window()) log.summary.passing_time = filter.window()->end();
  return log;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string log_header() {
  std::string out;
  for (std::size_t i = 0; i < kLogColumns.size(); ++i) {
    if (i) out += ',';
    out += kLogColumns[i];
  }
  return out;
}

inline void write_csv(std::ostream& os, const SimLog& log) {
  os << log_header() << '\n';
  for (const SimRow& r : log.rows) {
    const std::array<double, 21> values = {
        r.t,  r.x,  r.y,  r.s, r.e1, r.e1_dot, r.e2, r.e2_dot, r.road_heading, r.yaw_rate_ref,
        r.u_steady, r.u_mpc, r.u_override_left, r.u_override_right, r.u_safe, r.u_applied,
        r.h_left, r.h_right, r.distance, r.phi, r.mu};
    for (double v : values) os << format_value(v) << ',';
    os << r.detected << ',' << r.feasible_mpc << ',' << r.feasible_filter << ','
       << format_value(r.slack) << ',' << r.singularity_count << '\n';
  }
}

inline void write_csv_file(const std::string& path, const SimLog& log) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(os, log);
  if (!os) throw std::runtime_error("failed writing " + path);
}

/// Parses a log written by write_csv. Throws ConfigError on malformed input.
inline SimLog read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("log is empty");
  if (line != log_header()) throw ConfigError("log header does not match");
  SimLog log;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ConfigError("log line " + std::to_string(line_no) + ": bad value '" + cell + "'");
      }
      v.push_back(value);
    }
    if (v.size() != kLogColumns.size()) {
      throw ConfigError("log line " + std::to_string(line_no) + ": expected " +
                        std::to_string(kLogColumns.size()) + " columns");
    }
    SimRow r;
    r.t = v[0]; r.x = v[1]; r.y = v[2]; r.s = v[3];
    r.e1 = v[4]; r.e1_dot = v[5]; r.e2 = v[6]; r.e2_dot = v[7];
    r.road_heading = v[8]; r.yaw_rate_ref = v[9]; r.u_steady = v[10]; r.u_mpc = v[11];
    r.u_override_left = v[12]; r.u_override_right = v[13]; r.u_safe = v[14]; r.u_applied = v[15];
    r.h_left = v[16]; r.h_right = v[17]; r.distance = v[18]; r.phi = v[19]; r.mu = v[20];
    r.detected = static_cast<int>(v[21]);
    r.feasible_mpc = static_cast<int>(v[22]);
    r.feasible_filter = static_cast<int>(v[23]);
    r.slack = v[24];
    r.singularity_count = static_cast<long>(v[25]);
    log.rows.push_back(r);
  }
  if (log.rows.empty()) throw ConfigError("log has no data rows");
  log.summary = summarize(log.rows);
  return log;
}

inline SimLog read_csv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open log " + path);
  return read_csv(is);
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayTolerances {
  double barrier = 1e-6;   // absolute, on h and Phi
  double sharing = 1e-6;   // relative, on the control-sharing gap
};

struct ReplayViolation {
  std::size_t row = 0;
  std::string what;
  double expected = 0.0;
  double logged = 0.0;
};

/**
 * Recomputes barriers and the smooth step from the logged states and checks
 * them against the logged values, together with time monotonicity and, when
 * both sides share one constant-gain law, the control-sharing gap.
 */
inline std::vector<ReplayViolation> replay_check(const SimLog& log, const Scenario& sc,
                                                 const ReplayTolerances& tol = {}) {
  const ScenarioSetup setup = build_setup(sc);
  std::vector<ReplayViolation> out;
  const auto flag = [&](std::size_t i, const char* what, double expected, double logged,
                        double limit) {
    if (!(std::abs(expected - logged) <= limit)) out.push_back({i, what, expected, logged});
  };
  const auto& o = setup.barrier.obstacle;
  const bool sharing = sc.sim.filter_enabled && o && sc.filter.lane_law == BarrierLaw::kEsf &&
                       sc.filter.obstacle_law == BarrierLaw::kEsf &&
                       sc.filter.lane_gains.c1 == sc.filter.obstacle_gains.c1 &&
                       sc.filter.lane_gains.c2 == sc.filter.obstacle_gains.c2 &&
                       std::abs(setup.barrier.lane_expansion -
                                (0.5 * sc.lane_width + o->barrier_offset)) <= 1e-12;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    const SimRow& r = log.rows[i];
    if (i > 0 && !(r.t > log.rows[i - 1].t)) out.push_back({i, "t", log.rows[i - 1].t, r.t});
    const ErrorState x{r.e1, r.e1_dot, r.e2, r.e2_dot};
    const GlobalPose pose{r.x, r.y, setup.road.heading(r.s), r.s};
    const BarrierEval e = barrier_lie_terms(x, pose, setup.road, setup.model, setup.barrier);
    flag(i, "h_l", e.left.h, r.h_left, tol.barrier);
    flag(i, "h_r", e.right.h, r.h_right, tol.barrier);
    flag(i, "phi", e.phi, r.phi, tol.barrier);
    if (sharing && std::isfinite(r.u_override_left) && std::isfinite(r.u_override_right)) {
      const double expected = -sc.filter.lane_gains.c1 * sc.filter.lane_gains.c2 *
                              sc.lane_width / e.left.lglf_h;
      const double gap = r.u_override_left - r.u_override_right;
      flag(i, "sharing", expected, gap, tol.sharing * std::max(1.0, std::abs(expected)));
    }
  }
  return out;
}

}  // namespace lanesafe
