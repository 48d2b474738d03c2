// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <future>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lanesafe/mpc_tracker.hpp"
#include "lanesafe/numerics/rk4.hpp"
#include "lanesafe/scenario.hpp"
#include "lanesafe/sim_engine.hpp"
#include "oracles.hpp"

using namespace lanesafe;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

constexpr double kSteadyStateTol = 1e-9;
constexpr double kSharedSumTol = 1e-12;
constexpr double kSharingGapRelTol = 1e-8;
constexpr double kLieFirstTol = 1e-6;
constexpr double kLieSecondTol = 1e-4;
constexpr double kDareTol = 1e-9;
constexpr double kInvarianceTol = 1e-9;
constexpr double kQpTol = 1e-8;
constexpr double kClampTol = 1e-10;
constexpr double kSimWallLimit = 60.0;
constexpr double kArcCurvature = 1.0 / 1800.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

RoadProfile arc_road() {
  return RoadProfile({{200.0, 0.0, 0.0}, {100.0, 0.0, kArcCurvature}, {500.0, kArcCurvature, kArcCurvature}},
                     3.7);
}

BarrierConfig shared_config(const RoadProfile& road) {
  BarrierConfig cfg;
  cfg.lane_width = road.lane_width();
  cfg.obstacle = place_obstacle(road, 350.0, -0.5, 2.0, 40.0);
  cfg.lane_expansion = 0.5 * cfg.lane_width + cfg.obstacle->barrier_offset;
  return cfg;
}

/// Augmented state on the arc with the vehicle inside the detection region.
AugmentedState near_obstacle_state(std::mt19937_64& rng, const RoadProfile& road, const Obstacle& o) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const double s = 340.0 + 8.0 * u(rng);
    const ErrorState x{1.5 * u(rng), 1.0 * u(rng), 0.1 * u(rng), 0.3 * u(rng)};
    const Eigen::Vector2d p = road.position(s) + x.e1 * road.left_normal(s);
    const double d = squared_obstacle_distance(p(0), p(1), o);
    const double delta_sq = o.detection_radius * o.detection_radius;
    if (d > 0.05 * delta_sq && d < 0.95 * delta_sq) return augment(x, GlobalPose{p(0), p(1), road.heading(s), s});
  }
}

BarrierEval eval_at(const AugmentedState& z, const RoadProfile& road, const LateralModel& model,
                    const BarrierConfig& cfg) {
  const auto [x, pose] = split(z, road);
  return barrier_lie_terms(x, pose, road, model, cfg);
}

struct TimedRun {
  SimLog log;
  double seconds = 0.0;
};

TimedRun run_scenario(const fs::path& file) {
  const Scenario sc = load_scenario(file.string()).scenario;
  const auto start = Clock::now();
  TimedRun r{simulate_scenario(sc), 0.0};
  r.seconds = seconds_since(start);
  return r;
}

std::string csv_of(const SimLog& log) {
  std::ostringstream os;
  write_csv(os, log);
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome steady_state_residual() {
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int set = 0; set < 20; ++set) {
    VehicleParams p;
    p.mass = 1000.0 + 1500.0 * u(rng);
    p.yaw_inertia = 1500.0 + 3000.0 * u(rng);
    p.front_axle = 0.9 + 0.8 * u(rng);
    p.rear_axle = 0.9 + 0.8 * u(rng);
    p.front_stiffness = 40000.0 + 80000.0 * u(rng);
    p.rear_stiffness = 40000.0 + 80000.0 * u(rng);
    p.speed = 5.0 + 30.0 * u(rng);
    const LateralModel m = build_lateral_model(p);
    for (int k = 0; k < 100; ++k) {
      const double r = 0.1 * u(rng) - 0.05;
      const SteadyState ss = steady_state_tuple(m, r);
      worst = std::max(worst, (m.a * ss.state + m.b * ss.input + m.g * r).cwiseAbs().maxCoeff());
    }
  }
  const double elapsed = seconds_since(start);
  return {worst <= kSteadyStateTol && elapsed < 1.0,
          "max residual " + fmt("%.3g", worst) + ", " + fmt("%.3f", elapsed) + " s"};
}

Outcome barrier_algebra() {
  const auto start = Clock::now();
  const RoadProfile road = arc_road();
  const LateralModel model = build_lateral_model(VehicleParams{});
  const BarrierConfig cfg = shared_config(road);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> gain(1.0, 20.0), when(0.0, 1.99);
  const PrescribedTime pt{0.0, 2.0};
  double worst_sum = 0.0, worst_gap = 0.0;
  bool all_defined = true;
  for (int k = 0; k < 1000; ++k) {
    const BarrierEval e = eval_at(near_obstacle_state(rng, road, *cfg.obstacle), road, model, cfg);
    worst_sum = std::max({worst_sum, std::abs(e.left.h + e.right.h - cfg.lane_width),
                          std::abs(e.left.lf_h + e.right.lf_h), std::abs(e.left.lglf_h + e.right.lglf_h)});
    const double c1 = gain(rng), c2 = gain(rng);
    const auto ul = esf_override(e.left, c1, c2);
    const auto ur = esf_override(e.right, c1, c2);
    const ScheduledGains g = ptsf_gains(pt, BarrierGains{c1, c2, 1.0}, when(rng), 1e4);
    const auto pl = ptsf_override(e.left, g.c1, g.c2, g.c1_dot);
    const auto pr = ptsf_override(e.right, g.c1, g.c2, g.c1_dot);
    if (!ul || !ur || !pl || !pr) {
      all_defined = false;
      continue;
    }
    const double fixed = -c1 * c2 * cfg.lane_width / e.left.lglf_h;
    const double scheduled = -(g.c1_dot + g.c1 * g.c2) * cfg.lane_width / e.left.lglf_h;
    worst_gap = std::max({worst_gap, std::abs(*ul - *ur - fixed) / std::max(1.0, std::abs(fixed)),
                          std::abs(*pl - *pr - scheduled) / std::max(1.0, std::abs(scheduled))});
  }
  const double elapsed = seconds_since(start);
  return {all_defined && worst_sum <= kSharedSumTol && worst_gap <= kSharingGapRelTol && elapsed < 1.0,
          "sum error " + fmt("%.3g", worst_sum) + ", sharing gap rel error " + fmt("%.3g", worst_gap) + ", " +
              fmt("%.3f", elapsed) + " s"};
}

Outcome lie_derivatives() {
  const auto start = Clock::now();
  const RoadProfile road = arc_road();
  const LateralModel model = build_lateral_model(VehicleParams{});
  const BarrierConfig cfg = shared_config(road);
  std::mt19937_64 rng(3);
  double first = 0.0, second = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto [f, s] = oracle::lie_difference_error(near_obstacle_state(rng, road, *cfg.obstacle), road, model, cfg);
    first = std::max(first, f);
    second = std::max(second, s);
  }
  const double elapsed = seconds_since(start);
  return {first <= kLieFirstTol && second <= kLieSecondTol && elapsed < 5.0,
          "first order " + fmt("%.3g", first) + ", second order " + fmt("%.3g", second) + ", " +
              fmt("%.3f", elapsed) + " s"};
}

Outcome scenario_a(const TimedRun& esf, const TimedRun& ptsf, const TimedRun& open) {
  bool pass = true;
  std::string detail;
  for (const auto& [name, r] : {std::pair{"ESf", &esf}, std::pair{"PTSf", &ptsf}}) {
    const SimSummary& s = r->log.summary;
    pass = pass && r->seconds < kSimWallLimit && s.min_h_left >= 0.0 && s.min_h_right >= 0.0 &&
           s.filter_infeasible == 0 && s.singularities == 0;
    detail += std::string(name) + " min h_l " + fmt("%.3g", s.min_h_left) + " min h_r " +
              fmt("%.3g", s.min_h_right) + " softened " + std::to_string(s.filter_infeasible) + " singular " +
              std::to_string(s.singularities) + " " + fmt("%.1f", r->seconds) + " s; ";
  }
  pass = pass && open.log.summary.min_distance < 0.0;
  detail += "unfiltered min d " + fmt("%.3g", open.log.summary.min_distance);
  return {pass, detail};
}

Outcome peak_override(const TimedRun& esf, const TimedRun& ptsf, double reduction) {
  const double ratio = ptsf.log.summary.peak_override / esf.log.summary.peak_override;
  return {ratio <= 1.0 - reduction,
          "ratio " + fmt("%.4f", ratio) + " (PTSf " + fmt("%.4g", ptsf.log.summary.peak_override) + " rad, ESf " +
              fmt("%.4g", esf.log.summary.peak_override) + " rad, limit " + fmt("%.2f", 1.0 - reduction) + ")"};
}

Outcome scenario_b(const TimedRun& saturated, const TimedRun& iccbf, const Scenario& iccbf_scenario) {
  const SimSummary& a = saturated.log.summary;
  const SimSummary& b = iccbf.log.summary;
  const double expanded = 0.5 * iccbf_scenario.lane_width + build_setup(iccbf_scenario).barrier.lane_expansion;
  const bool pass = a.min_distance < 0.0 && b.min_distance >= 0.0 && b.max_lateral_offset <= expanded;
  return {pass, "saturated PTSf min d " + fmt("%.3g", a.min_distance) + "; PT-ICCBF min d " +
                    fmt("%.3g", b.min_distance) + ", max offset " + fmt("%.3f", b.max_lateral_offset) + " <= " +
                    fmt("%.3f", expanded) + ", softened " + std::to_string(b.filter_infeasible)};
}

Outcome mpc_audits(const TimedRun& hard) {
  const LateralModel m = build_lateral_model(VehicleParams{});
  const MpcConfig cfg;
  const DiscreteModel d = discretize_zoh(m, cfg.sample_time);
  const MatrixXd r = MatrixXd::Constant(1, 1, cfg.input_weight);
  const TerminalIngredients t = terminal_ingredients(d.a, d.b, cfg.state_weight, r);
  const double residual = numerics::dare_residual(d.a, d.b, cfg.state_weight, r, t.p);

  const numerics::Polytope admissible = admissible_correction_set(m, cfg);
  const VectorXd w = disturbance_half_widths(d, m, cfg.yaw_rate_step_bound);
  const MicaResult set = mica_terminal_set(d.a, d.b, t.k, admissible, w);
  bool invariant = set.converged && !set.empty;
  std::size_t sampled = 0;
  if (invariant) {
    const MatrixXd a_cl = d.a - d.b * t.k;
    std::mt19937_64 rng(7);
    const auto samples = numerics::sample_polytope(set.set, 1000, rng);
    sampled = samples.size();
    invariant = sampled == 1000;
    for (const VectorXd& e : samples) {
      invariant = invariant && admissible.contains(t.k * e, kInvarianceTol);
      for (int v = 0; v < 16; ++v) {
        VectorXd wv(4);
        for (int j = 0; j < 4; ++j) wv(j) = ((v >> j) & 1 ? 1.0 : -1.0) * w(j);
        invariant = invariant && set.set.contains(a_cl * e - wv, kInvarianceTol);
      }
    }
  }
  const long infeasible = hard.log.summary.mpc_infeasible;
  return {residual <= kDareTol && invariant && infeasible == 0,
          "DARE residual " + fmt("%.3g", residual) + ", terminal set " + (set.empty ? "empty" : "nonempty") +
              ", invariant over " + std::to_string(sampled) + " samples x 16 vertices: " +
              (invariant ? "yes" : "no") + ", hard-terminal infeasible samples " + std::to_string(infeasible)};
}

Outcome numerics_checks() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> rows(1, 6);
  double qp_err = 0.0;
  bool qp_ok = true;
  for (int k = 0; k < 100; ++k) {
    const numerics::QpProblem p = oracle::random_qp(rng, 5, rows(rng));
    const numerics::QpSolution s = numerics::solve_qp(p);
    const auto reference = oracle::enumerate_qp(p);
    if (!s.optimal() || !reference) {
      qp_ok = false;
      continue;
    }
    qp_err = std::max(qp_err, (s.z - *reference).cwiseAbs().maxCoeff());
  }
  double clamp_err = 0.0;
  bool clamp_ok = true;
  for (int k = 0; k < 1000; ++k) {
    const auto inst = oracle::random_scalar_filter(rng, k % 2 == 0);
    const FilterDecision d = assemble_and_solve_filter_qp(inst.nominal, inst.rows, inst.box);
    clamp_ok = clamp_ok && d.feasible;
    clamp_err = std::max(clamp_err, std::abs(d.u_safe - oracle::clamp_projection(inst.nominal, inst.rows, inst.box)));
  }
  const auto f = [](double, const Eigen::Matrix<double, 1, 1>& x) { return x; };
  const auto error = [&](int steps) {
    Eigen::Matrix<double, 1, 1> x(1.0);
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) x = numerics::rk4_step(f, x, k * dt, dt);
    return std::abs(x(0) - std::exp(1.0));
  };
  const double order = std::log2(error(20) / error(40));
  const bool order_ok = std::abs(order - 4.0) < 0.1;
  return {qp_ok && qp_err <= kQpTol && clamp_ok && clamp_err <= kClampTol && order_ok,
          "QP vs enumeration " + fmt("%.3g", qp_err) + ", clamp " + fmt("%.3g", clamp_err) + ", RK4 order " +
              fmt("%.3f", order)};
}

Outcome determinism(const std::vector<fs::path>& files) {
  std::vector<std::future<bool>> jobs;
  for (const fs::path& f : files) {
    jobs.push_back(std::async(std::launch::async, [f] {
      const Scenario sc = load_scenario(f.string()).scenario;
      return csv_of(simulate_scenario(sc)) == csv_of(simulate_scenario(sc));
    }));
  }
  int identical = 0;
  for (auto& j : jobs) identical += j.get() ? 1 : 0;
  return {identical == static_cast<int>(files.size()),
          std::to_string(identical) + "/" + std::to_string(files.size()) + " scenarios byte-identical"};
}

/// Rerun both contrast scenarios at a quarter of the integration step and
/// report whether any safety outcome flips.
std::string step_sensitivity(const fs::path& dir) {
  const auto refined = [&](const char* name) {
    Scenario sc = load_scenario((dir / name).string()).scenario;
    sc.sim.fine_step *= 0.25;
    return simulate_scenario(sc).summary;
  };
  const SimSummary a = refined("scenario_a_ptsf.json");
  const SimSummary sat = refined("scenario_b_ptsf_saturated.json");
  const SimSummary b = refined("scenario_b_pticcbf.json");
  const bool stable = a.min_h_right >= -1e-9 && sat.min_distance < 0.0 && b.min_distance >= 0.0;
  return std::string(stable ? "outcomes unchanged" : "OUTCOME CHANGED") + " at quarter step (A PTSf min h_r " +
         fmt("%.3g", a.min_h_right) + ", B saturated min d " + fmt("%.3g", sat.min_distance) +
         ", B PT-ICCBF min d " + fmt("%.3g", b.min_distance) + ")";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path(LANESAFE_SOURCE_DIR);
  const fs::path scenarios = root / "scenarios";
  const auto thresholds = nlohmann::json::parse(read_text_file((root / "tools" / "acceptance.json").string()));
  const double reduction = thresholds.at("peak_override_reduction").get<double>();

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(scenarios))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  const auto launch = [&](const char* name) {
    return std::async(std::launch::async, run_scenario, scenarios / name);
  };
  auto a_esf = launch("scenario_a_esf.json");
  auto a_ptsf = launch("scenario_a_ptsf.json");
  auto a_open = launch("scenario_a_unfiltered.json");
  auto b_sat = launch("scenario_b_ptsf_saturated.json");
  auto b_iccbf = launch("scenario_b_pticcbf.json");
  auto hard = launch("nominal_hard_terminal.json");

  int failures = 0;
  const auto report = [&](int id, const char* title, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << o.detail << "\n"
              << std::flush;
    failures += o.pass ? 0 : 1;
  };

  report(1, "steady-state residual", steady_state_residual());
  report(2, "shared barrier algebra", barrier_algebra());
  report(3, "Lie derivatives vs finite differences", lie_derivatives());
  const TimedRun esf = a_esf.get(), ptsf = a_ptsf.get(), open = a_open.get();
  report(4, "scenario A safety", scenario_a(esf, ptsf, open));
  report(5, "peak override reduction", peak_override(esf, ptsf, reduction));
  const Scenario iccbf_scenario = load_scenario((scenarios / "scenario_b_pticcbf.json").string()).scenario;
  report(6, "scenario B contrast", scenario_b(b_sat.get(), b_iccbf.get(), iccbf_scenario));
  report(7, "MPC audits", mpc_audits(hard.get()));
  report(8, "numerics", numerics_checks());
  report(9, "determinism", determinism(files));
  std::cout << "INFO step sensitivity: " << step_sensitivity(scenarios) << "\n";
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << "\n";
  return failures == 0 ? 0 : 1;
}
