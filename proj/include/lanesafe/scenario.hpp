#pragma once

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lanesafe/errors.hpp"
#include "lanesafe/mpc_tracker.hpp"
#include "lanesafe/numerics/dare.hpp"
#include "lanesafe/sim_engine.hpp"

namespace lanesafe {

inline constexpr int kSchemaVersion = 1;

/// Properties a scenario declares about its own outcome.
struct Expectations {
  std::optional<bool> lane_kept;        // min h_l >= 0
  std::optional<bool> obstacle_kept;    // min h_r >= 0
  std::optional<bool> collision;        // min d < 0
  std::optional<bool> within_expanded_lane;  // |e1 cos e2| <= w/2 + e_v
  std::optional<bool> filter_feasible;  // zero softened filter QPs
  std::optional<bool> mpc_feasible;     // zero infeasible MPC samples
  std::optional<bool> no_singularities;
  std::optional<double> max_peak_override;  // rad
};

struct ScenarioFile {
  Scenario scenario;
  Expectations expect;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> names(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!names.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

inline double number(const json& j, const std::string& where, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

inline double required_number(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return number(j, where, key, 0.0);
}

inline bool boolean(const json& j, const std::string& where, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true/false");
  return j.at(key).get<bool>();
}

inline std::string text(const json& j, const std::string& where, const char* key,
                        const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

inline BarrierLaw parse_law(const std::string& s, const std::string& where) {
  if (s == "esf") return BarrierLaw::kEsf;
  if (s == "ptsf") return BarrierLaw::kPtsf;
  if (s == "iccbf") return BarrierLaw::kIccbf;
  if (s == "pticcbf") return BarrierLaw::kPtIccbf;
  throw ConfigError(where + ": unknown law '" + s + "'");
}

inline BarrierGains parse_gains(const json& j, const std::string& where, BarrierGains g) {
  check_keys(j, where, {"c1", "c2", "c3"});
  g.c1 = number(j, where, "c1", g.c1);
  g.c2 = number(j, where, "c2", g.c2);
  g.c3 = number(j, where, "c3", g.c3);
  return g;
}

inline std::optional<bool> flag(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  if (!j.at(key).is_boolean()) throw ConfigError(std::string("expect.") + key + ": expected true/false");
  return j.at(key).get<bool>();
}

}  // namespace detail

/// Parses scenario text (JSON with // and /* */ comments).
inline ScenarioFile parse_scenario(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  detail::check_keys(root, "scenario", {"schema_version", "name", "vehicle", "road", "obstacle",
                                         "filter", "mpc", "sim", "expect"});
  if (!root.contains("schema_version") || !root.at("schema_version").is_number_integer() ||
      root.at("schema_version").get<int>() != kSchemaVersion) {
    throw ConfigError("scenario: schema_version must be " + std::to_string(kSchemaVersion));
  }
  ScenarioFile out;
  Scenario& sc = out.scenario;
  sc.name = detail::text(root, "scenario", "name", sc.name);

  if (root.contains("vehicle")) {
    const json& j = root.at("vehicle");
    const std::string w = "vehicle";
    detail::check_keys(j, w, {"mass", "yaw_inertia", "front_axle", "rear_axle", "front_stiffness",
                              "rear_stiffness", "speed"});
    VehicleParams& p = sc.vehicle;
    p.mass = detail::number(j, w, "mass", p.mass);
    p.yaw_inertia = detail::number(j, w, "yaw_inertia", p.yaw_inertia);
    p.front_axle = detail::number(j, w, "front_axle", p.front_axle);
    p.rear_axle = detail::number(j, w, "rear_axle", p.rear_axle);
    p.front_stiffness = detail::number(j, w, "front_stiffness", p.front_stiffness);
    p.rear_stiffness = detail::number(j, w, "rear_stiffness", p.rear_stiffness);
    p.speed = detail::number(j, w, "speed", p.speed);
  }

  {
    if (!root.contains("road")) throw ConfigError("scenario: missing key 'road'");
    const json& j = root.at("road");
    detail::check_keys(j, "road", {"lane_width", "segments"});
    sc.lane_width = detail::number(j, "road", "lane_width", sc.lane_width);
    if (!j.contains("segments") || !j.at("segments").is_array()) {
      throw ConfigError("road.segments: expected an array");
    }
    for (std::size_t i = 0; i < j.at("segments").size(); ++i) {
      const json& s = j.at("segments")[i];
      const std::string w = "road.segments[" + std::to_string(i) + "]";
      detail::check_keys(s, w, {"length", "curvature_start", "curvature_end"});
      RoadSegment seg;
      seg.length = detail::required_number(s, w, "length");
      seg.curvature_start = detail::number(s, w, "curvature_start", 0.0);
      seg.curvature_end = detail::number(s, w, "curvature_end", seg.curvature_start);
      sc.segments.push_back(seg);
    }
  }

  if (root.contains("obstacle") && !root.at("obstacle").is_null()) {
    const json& j = root.at("obstacle");
    const std::string w = "obstacle";
    detail::check_keys(j, w, {"arc_length", "center_offset", "radius", "detection_distance"});
    ObstacleSpec o;
    o.arc_length = detail::required_number(j, w, "arc_length");
    o.center_offset = detail::required_number(j, w, "center_offset");
    o.radius = detail::required_number(j, w, "radius");
    o.detection_distance = detail::required_number(j, w, "detection_distance");
    sc.obstacle = o;
  }

  if (root.contains("filter")) {
    const json& j = root.at("filter");
    const std::string w = "filter";
    detail::check_keys(j, w, {"enabled", "lane_law", "obstacle_law", "lane_gains",
                              "obstacle_gains", "input_limit", "mu_cap", "ramp_duration",
                              "singularity_threshold", "slack_weight", "lane_expansion"});
    FilterConfig& f = sc.filter;
    sc.sim.filter_enabled = detail::boolean(j, w, "enabled", true);
    f.lane_law = detail::parse_law(detail::text(j, w, "lane_law", "esf"), w + ".lane_law");
    f.obstacle_law =
        detail::parse_law(detail::text(j, w, "obstacle_law", "esf"), w + ".obstacle_law");
    if (j.contains("lane_gains")) {
      f.lane_gains = detail::parse_gains(j.at("lane_gains"), w + ".lane_gains", f.lane_gains);
    }
    if (j.contains("obstacle_gains")) {
      f.obstacle_gains =
          detail::parse_gains(j.at("obstacle_gains"), w + ".obstacle_gains", f.obstacle_gains);
    }
    if (j.contains("input_limit")) f.input_limit = detail::number(j, w, "input_limit", 0.0);
    f.mu_cap = detail::number(j, w, "mu_cap", f.mu_cap);
    f.ramp_duration = detail::number(j, w, "ramp_duration", f.ramp_duration);
    f.singularity_threshold =
        detail::number(j, w, "singularity_threshold", f.singularity_threshold);
    f.slack_weight = detail::number(j, w, "slack_weight", f.slack_weight);
    if (j.contains("lane_expansion")) {
      const json& e = j.at("lane_expansion");
      if (e.is_string()) {
        if (e.get<std::string>() != "shared") {
          throw ConfigError("filter.lane_expansion: expected a number or \"shared\"");
        }
      } else {
        sc.lane_expansion = detail::number(j, w, "lane_expansion", 0.0);
      }
    }
  }

  if (root.contains("mpc")) {
    const json& j = root.at("mpc");
    const std::string w = "mpc";
    detail::check_keys(j, w, {"horizon", "state_weight", "input_weight", "terminal_scale",
                              "sample_time", "input_limit", "yaw_rate_bound",
                              "yaw_rate_step_bound", "terminal"});
    MpcConfig& m = sc.mpc;
    if (j.contains("horizon")) {
      if (!j.at("horizon").is_number_integer()) throw ConfigError("mpc.horizon: expected an integer");
      m.horizon = j.at("horizon").get<int>();
    }
    if (j.contains("state_weight")) {
      const json& q = j.at("state_weight");
      if (!q.is_array() || q.size() != 4) {
        throw ConfigError("mpc.state_weight: expected four diagonal entries");
      }
      for (int i = 0; i < 4; ++i) {
        if (!q[static_cast<std::size_t>(i)].is_number()) {
          throw ConfigError("mpc.state_weight: expected numbers");
        }
      }
      m.state_weight = Eigen::Vector4d(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                       q[3].get<double>())
                           .asDiagonal();
    }
    m.input_weight = detail::number(j, w, "input_weight", m.input_weight);
    m.terminal_scale = detail::number(j, w, "terminal_scale", m.terminal_scale);
    m.sample_time = detail::number(j, w, "sample_time", m.sample_time);
    m.input_limit = detail::number(j, w, "input_limit", m.input_limit);
    m.yaw_rate_bound = detail::number(j, w, "yaw_rate_bound", m.yaw_rate_bound);
    m.yaw_rate_step_bound = detail::number(j, w, "yaw_rate_step_bound", m.yaw_rate_step_bound);
    const std::string terminal = detail::text(j, w, "terminal", "scaled_cost");
    if (terminal == "scaled_cost") m.terminal = TerminalMode::kScaledCost;
    else if (terminal == "hard_set") m.terminal = TerminalMode::kHardSet;
    else throw ConfigError("mpc.terminal: expected scaled_cost or hard_set");
  }

  if (root.contains("sim")) {
    const json& j = root.at("sim");
    const std::string w = "sim";
    detail::check_keys(j, w, {"duration", "fine_step", "saturation", "initial_state",
                              "initial_arc_length", "seed"});
    SimConfig& s = sc.sim;
    s.duration = detail::number(j, w, "duration", s.duration);
    s.fine_step = detail::number(j, w, "fine_step", s.fine_step);
    const std::string sat = detail::text(j, w, "saturation", "none");
    if (sat == "none") s.saturation = Saturation::kNone;
    else if (sat == "hard_clip") s.saturation = Saturation::kHardClip;
    else throw ConfigError("sim.saturation: expected none or hard_clip");
    if (j.contains("initial_state")) {
      const json& x = j.at("initial_state");
      detail::check_keys(x, "sim.initial_state", {"e1", "e1_dot", "e2", "e2_dot"});
      s.initial_state.e1 = detail::number(x, "sim.initial_state", "e1", 0.0);
      s.initial_state.e1_dot = detail::number(x, "sim.initial_state", "e1_dot", 0.0);
      s.initial_state.e2 = detail::number(x, "sim.initial_state", "e2", 0.0);
      s.initial_state.e2_dot = detail::number(x, "sim.initial_state", "e2_dot", 0.0);
    }
    s.initial_arc_length = detail::number(j, w, "initial_arc_length", s.initial_arc_length);
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) throw ConfigError("sim.seed: expected an unsigned integer");
      s.seed = j.at("seed").get<std::uint64_t>();
    }
  }

  if (root.contains("expect")) {
    const json& j = root.at("expect");
    detail::check_keys(j, "expect", {"lane_kept", "obstacle_kept", "collision",
                                     "within_expanded_lane", "filter_feasible", "mpc_feasible",
                                     "no_singularities", "max_peak_override"});
    Expectations& e = out.expect;
    e.lane_kept = detail::flag(j, "lane_kept");
    e.obstacle_kept = detail::flag(j, "obstacle_kept");
    e.collision = detail::flag(j, "collision");
    e.within_expanded_lane = detail::flag(j, "within_expanded_lane");
    e.filter_feasible = detail::flag(j, "filter_feasible");
    e.mpc_feasible = detail::flag(j, "mpc_feasible");
    e.no_singularities = detail::flag(j, "no_singularities");
    if (j.contains("max_peak_override")) {
      e.max_peak_override = detail::number(j, "expect", "max_peak_override", 0.0);
    }
  }
  if (sc.filter.input_limit == std::nullopt &&
      (is_input_constrained(sc.filter.lane_law) || is_input_constrained(sc.filter.obstacle_law))) {
    sc.filter.input_limit = sc.mpc.input_limit;
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("file not found: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline ScenarioFile load_scenario(const std::string& path) {
  return parse_scenario(read_text_file(path));
}

/// Checks every module precondition of a scenario before it is run. Returns
/// human-readable notes on what was verified.
inline std::vector<std::string> audit_scenario(const Scenario& sc) {
  std::vector<std::string> notes;
  try {
    sc.vehicle.validate();
    sc.filter.validate();
    const ScenarioSetup setup = build_setup(sc);
    const LateralModel& model = setup.model;
    sc.mpc.validate(model);
    sc.sim.step_count();
    sc.sim.steps_per_sample(sc.mpc.sample_time);

    const DiscreteModel d = discretize_zoh(model, sc.mpc.sample_time);
    Eigen::Matrix4d ctrb;
    ctrb << d.b, d.a * d.b, d.a * d.a * d.b, d.a * d.a * d.a * d.b;
    const auto rank = Eigen::FullPivLU<Eigen::Matrix4d>(ctrb).rank();
    if (rank < 4) throw ConfigError("discrete model is not controllable");
    notes.push_back("controllable (rank 4)");

    const ReferenceBounds rb = reference_bounds(setup.road, model.speed, sc.mpc.sample_time);
    if (rb.max_yaw_rate > sc.mpc.yaw_rate_bound + 1e-12) {
      throw ConfigError("road yaw rate " + std::to_string(rb.max_yaw_rate) +
                        " exceeds mpc.yaw_rate_bound");
    }
    if (rb.max_yaw_rate_step > sc.mpc.yaw_rate_step_bound + 1e-12) {
      throw ConfigError("road yaw-rate step " + std::to_string(rb.max_yaw_rate_step) +
                        " exceeds mpc.yaw_rate_step_bound");
    }
    notes.push_back("reference within yaw-rate bounds");

    const MpcTracker tracker(model, sc.mpc);
    const auto rho = spectral_radius(d.a - d.b * tracker.terminal().k);
    notes.push_back("terminal gain closed-loop spectral radius " + std::to_string(rho));
    if (tracker.terminal_set()) notes.push_back("terminal set nonempty");

    if (sc.sim.initial_arc_length < 0.0 ||
        sc.sim.initial_arc_length + model.speed * sc.sim.duration > setup.road.length()) {
      throw ConfigError("road is shorter than the simulated distance");
    }
    const auto [hl, hr] = barrier_values(sc.sim.initial_state,
                                         GlobalPose{0.0, 0.0, 0.0, sc.sim.initial_arc_length},
                                         BarrierConfig{setup.barrier.lane_width,
                                                       setup.barrier.lane_expansion, std::nullopt});
    if (hl < 0.0 || hr < 0.0) throw ConfigError("initial state outside the lane");
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  } catch (const NumericalError& e) {
    throw ConfigError(e.what());
  }
  return notes;
}

/// Expectation failures of a finished run; empty when all hold.
inline std::vector<std::string> check_expectations(const ScenarioFile& file, const SimLog& log) {
  const Expectations& e = file.expect;
  const SimSummary& s = log.summary;
  const ScenarioSetup setup = build_setup(file.scenario);
  std::vector<std::string> failures;
  const auto check = [&](const std::optional<bool>& want, bool got, const std::string& what) {
    if (want && *want != got) {
      failures.push_back(what + " expected " + (*want ? "true" : "false"));
    }
  };
  check(e.lane_kept, s.min_h_left >= 0.0, "lane_kept (min h_l = " + format_value(s.min_h_left) + ")");
  check(e.obstacle_kept, s.min_h_right >= 0.0,
        "obstacle_kept (min h_r = " + format_value(s.min_h_right) + ")");
  check(e.collision, s.min_distance < 0.0, "collision (min d = " + format_value(s.min_distance) + ")");
  check(e.within_expanded_lane,
        s.max_lateral_offset <= 0.5 * file.scenario.lane_width + setup.barrier.lane_expansion,
        "within_expanded_lane (max |p| = " + format_value(s.max_lateral_offset) + ")");
  check(e.filter_feasible, s.filter_infeasible == 0,
        "filter_feasible (" + std::to_string(s.filter_infeasible) + " softened steps)");
  check(e.mpc_feasible, s.mpc_infeasible == 0,
        "mpc_feasible (" + std::to_string(s.mpc_infeasible) + " infeasible samples)");
  check(e.no_singularities, s.singularities == 0,
        "no_singularities (" + std::to_string(s.singularities) + " events)");
  if (e.max_peak_override && !(s.peak_override <= *e.max_peak_override)) {
    failures.push_back("max_peak_override (peak = " + format_value(s.peak_override) + ")");
  }
  return failures;
}

}  // namespace lanesafe
