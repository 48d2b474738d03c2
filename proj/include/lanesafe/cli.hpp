#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lanesafe/errors.hpp"
#include "lanesafe/mpc_tracker.hpp"
#include "lanesafe/numerics/dare.hpp"
#include "lanesafe/scenario.hpp"
#include "lanesafe/sim_engine.hpp"
#include "lanesafe/svg_plot.hpp"

namespace lanesafe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode { kOk = 0, kFailed = 1, kConfigError = 2 };

// ---------------------------------------------------------------------------
// Numerics hooks: small files that pin a solver result.

inline Eigen::MatrixXd matrix_from(const json& j, const std::string& where) {
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a matrix");
  if (j[0].is_number()) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return m;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(where + ": ragged matrix");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline bool is_hook(const json& root) { return root.is_object() && root.contains("hook"); }

/// Runs a numerics hook and returns the mismatches against its expectations.
inline std::vector<std::string> run_hook(const json& root) {
  std::vector<std::string> failures;
  const std::string kind = root.at("hook").get<std::string>();
  const json& in = root.at("input");
  const json& expect = root.at("expect");
  const double tol = expect.value("tolerance", 1e-9);
  const auto near = [&](double got, double want, const std::string& what) {
    if (!(std::abs(got - want) <= tol)) {
      failures.push_back(what + ": got " + format_value(got) + ", expected " + format_value(want));
    }
  };
  if (kind == "dare") {
    const auto a = matrix_from(in.at("a"), "a"), b = matrix_from(in.at("b"), "b");
    const auto q = matrix_from(in.at("q"), "q"), r = matrix_from(in.at("r"), "r");
    const Eigen::MatrixXd p = numerics::solve_dare(a, b, q, r);
    const Eigen::MatrixXd want = matrix_from(expect.at("p"), "expect.p");
    if (want.rows() != p.rows() || want.cols() != p.cols()) throw ConfigError("expect.p: wrong size");
    for (Eigen::Index i = 0; i < p.size(); ++i) near(p(i), want(i), "p");
  } else if (kind == "mica") {
    const auto a = matrix_from(in.at("a"), "a"), b = matrix_from(in.at("b"), "b");
    const auto k = matrix_from(in.at("k"), "k");
    const double bound = in.at("input_bound").get<double>();
    const Eigen::VectorXd w = matrix_from(in.at("w_half_width"), "w_half_width");
    const MicaResult r = mica_terminal_set(
        a, b, k, Polytope::symmetric_box(Eigen::VectorXd::Constant(1, bound)), w);
    if (!r.converged || r.empty) failures.push_back("mica: not converged or empty");
    for (const json& pt : expect.value("contains", json::array())) {
      if (!r.set.contains(matrix_from(pt, "contains"), tol)) failures.push_back("mica: point not contained");
    }
    for (const json& pt : expect.value("excludes", json::array())) {
      if (r.set.contains(matrix_from(pt, "excludes"), tol)) failures.push_back("mica: point not excluded");
    }
  } else if (kind == "mpc") {
    MpcProblem p;
    p.a = matrix_from(in.at("a"), "a");
    p.b = matrix_from(in.at("b"), "b");
    p.q = matrix_from(in.at("q"), "q");
    p.r = in.at("r").get<double>();
    p.terminal_weight = matrix_from(in.at("p"), "p");
    p.horizon = in.at("horizon").get<int>();
    p.initial = matrix_from(in.at("initial"), "initial");
    p.disturbance = in.contains("disturbance") ? Eigen::VectorXd(matrix_from(in.at("disturbance"), "w"))
                                               : Eigen::VectorXd::Zero(p.a.rows());
    const MpcSolution s = solve_mpc_problem(p);
    if (!s.feasible) failures.push_back("mpc: infeasible");
    near(s.moves(0), expect.at("first_move").get<double>(), "first_move");
    near(s.cost, expect.at("cost").get<double>(), "cost");
  } else {
    throw ConfigError("unknown hook '" + kind + "'");
  }
  return failures;
}

// ---------------------------------------------------------------------------
// Run

struct RunResult {
  ScenarioFile file;
  SimLog log;
  std::vector<std::string> failures;
  std::vector<ReplayViolation> violations;
  std::string error;
};

inline json summary_json(const SimSummary& s) {
  const auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"min_h_left", finite(s.min_h_left)},
          {"min_h_right", finite(s.min_h_right)},
          {"min_distance", finite(s.min_distance)},
          {"peak_override", s.peak_override},
          {"max_lateral_offset", s.max_lateral_offset},
          {"max_sharing_error", s.max_sharing_error},
          {"filter_infeasible", s.filter_infeasible},
          {"mpc_infeasible", s.mpc_infeasible},
          {"singularities", s.singularities},
          {"gain_warning", s.gain_warning},
          {"detection_time", finite(s.detection_time)},
          {"passing_time", finite(s.passing_time)}};
}

inline json meta_json(const RunResult& r) {
  const ScenarioSetup setup = build_setup(r.file.scenario);
  json meta = {{"name", r.file.scenario.name},
               {"lane_width", r.file.scenario.lane_width},
               {"lane_expansion", setup.barrier.lane_expansion},
               {"summary", summary_json(r.log.summary)},
               {"expectation_failures", r.failures},
               {"replay_violations", r.violations.size()}};
  if (setup.barrier.obstacle) {
    const Obstacle& o = *setup.barrier.obstacle;
    meta["obstacle"] = {{"x", o.x}, {"y", o.y}, {"radius", o.radius},
                        {"barrier_offset", o.barrier_offset},
                        {"detection_radius", o.detection_radius}};
  }
  return meta;
}

inline std::string scenario_stem(const ScenarioFile& f, const std::string& path) {
  return f.scenario.name.empty() ? fs::path(path).stem().string() : f.scenario.name;
}

inline int cmd_validate(const std::vector<std::string>& files, std::ostream& out, std::ostream& err) {
  int code = kOk;
  for (const std::string& path : files) {
    try {
      const std::string text = read_text_file(path);
      const json root = json::parse(text, nullptr, false, true);
      if (is_hook(root)) {
        const auto failures = run_hook(root);
        for (const auto& f : failures) err << path << ": " << f << '\n';
        if (!failures.empty()) {
          code = std::max(code, static_cast<int>(kFailed));
          continue;
        }
        out << path << ": ok (hook " << root.at("hook").get<std::string>() << ")\n";
        continue;
      }
      const ScenarioFile f = parse_scenario(text);
      const auto notes = audit_scenario(f.scenario);
      out << path << ": ok";
      for (const auto& n : notes) out << "; " << n;
      out << '\n';
    } catch (const std::exception& e) {
      err << path << ": " << e.what() << '\n';
      return kConfigError;
    }
  }
  return code;
}

inline int cmd_run(const std::vector<std::string>& files, const std::string& out_dir, int jobs,
                   std::ostream& out, std::ostream& err) {
  std::vector<RunResult> results(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      results[i].file = load_scenario(files[i]);
      audit_scenario(results[i].file.scenario);
    } catch (const std::exception& e) {
      err << files[i] << ": " << e.what() << '\n';
      return kConfigError;
    }
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    err << out_dir << ": " << ec.message() << '\n';
    return kConfigError;
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < results.size(); i = next++) {
      RunResult& r = results[i];
      try {
        r.log = simulate_scenario(r.file.scenario);
        r.failures = check_expectations(r.file, r.log);
        r.violations = replay_check(r.log, r.file.scenario);
        const std::string stem = (fs::path(out_dir) / scenario_stem(r.file, files[i])).string();
        write_csv_file(stem + ".csv", r.log);
        std::ofstream meta(stem + ".meta.json", std::ios::binary);
        meta << meta_json(r).dump(2) << '\n';
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  const int n_workers = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(1, files.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int code = kOk;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const RunResult& r = results[i];
    if (!r.error.empty()) {
      err << files[i] << ": " << r.error << '\n';
      code = std::max(code, static_cast<int>(kFailed));
      continue;
    }
    const SimSummary& s = r.log.summary;
    out << r.file.scenario.name << ": min h_l " << format_value(s.min_h_left) << ", min h_r "
        << format_value(s.min_h_right) << ", min d " << format_value(s.min_distance)
        << ", peak override " << format_value(s.peak_override) << ", filter softened "
        << s.filter_infeasible << ", mpc infeasible " << s.mpc_infeasible << ", singular "
        << s.singularities << '\n';
    for (const auto& f : r.failures) err << r.file.scenario.name << ": expectation failed: " << f << '\n';
    for (const auto& v : r.violations) {
      err << r.file.scenario.name << ": replay row " << v.row << " " << v.what << " expected "
          << format_value(v.expected) << " logged " << format_value(v.logged) << '\n';
    }
    if (!r.failures.empty() || !r.violations.empty()) code = std::max(code, static_cast<int>(kFailed));
  }
  return code;
}

// ---------------------------------------------------------------------------
// Compare

inline SimLog load_log_or_run(const std::string& path) {
  if (fs::path(path).extension() == ".csv") return read_csv_file(path);
  const ScenarioFile f = load_scenario(path);
  audit_scenario(f.scenario);
  return simulate_scenario(f.scenario);
}

inline int cmd_compare(const std::string& a, const std::string& b, std::ostream& out,
                       std::ostream& err) {
  SimLog la, lb;
  try {
    la = load_log_or_run(a);
    lb = load_log_or_run(b);
  } catch (const std::exception& e) {
    err << e.what() << '\n';
    return kConfigError;
  }
  const SimSummary& x = la.summary;
  const SimSummary& y = lb.summary;
  const auto row = [&](const char* name, double u, double v) {
    out << name << ',' << format_value(u) << ',' << format_value(v) << '\n';
  };
  out << "metric," << fs::path(a).filename().string() << ',' << fs::path(b).filename().string() << '\n';
  row("min_h_left", x.min_h_left, y.min_h_left);
  row("min_h_right", x.min_h_right, y.min_h_right);
  row("min_distance", x.min_distance, y.min_distance);
  row("peak_override", x.peak_override, y.peak_override);
  row("filter_infeasible", static_cast<double>(x.filter_infeasible), static_cast<double>(y.filter_infeasible));
  row("mpc_infeasible", static_cast<double>(x.mpc_infeasible), static_cast<double>(y.mpc_infeasible));
  row("singularities", static_cast<double>(x.singularities), static_cast<double>(y.singularities));
  out << "peak_override_ratio," << format_value(y.peak_override / x.peak_override) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// Plots

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

/// Index of the row holding the smallest h_r.
inline std::size_t min_h_right_row(const SimLog& log) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    if (log.rows[i].h_right < log.rows[best].h_right) best = i;
  }
  return best;
}

inline void trajectory_plot(const std::string& name, const SimLog& log, const json& meta,
                            const std::string& path) {
  svg::Figure fig(900, 420, name + ": trajectory");
  fig.labels("X [m]", "Y [m]");
  svg::Series car, left, right, expanded;
  const double half = meta.value("lane_width", 3.7) / 2.0;
  const double ev = meta.value("lane_expansion", 0.0);
  for (const SimRow& r : log.rows) {
    car.emplace_back(r.x, r.y);
    // The reference point lies e1 to the right of the car along the road normal.
    const double nx = -std::sin(r.road_heading), ny = std::cos(r.road_heading);
    const double cx = r.x - r.e1 * nx, cy = r.y - r.e1 * ny;
    left.emplace_back(cx + half * nx, cy + half * ny);
    right.emplace_back(cx - half * nx, cy - half * ny);
    expanded.emplace_back(cx + (half + ev) * nx, cy + (half + ev) * ny);
  }
  std::vector<svg::Series> all{car, left, right};
  if (meta.contains("obstacle")) {
    const json& o = meta["obstacle"];
    const double ox = o["x"], oy = o["y"];
    // Zoom around the obstacle so the passing manoeuvre is visible.
    fig.set_limits(ox - 80.0, ox + 60.0, oy - 6.0, oy + 6.0);
  } else {
    fig.fit(all);
  }
  fig.line(left, "#555", 1.0, "", "lane edges");
  fig.line(right, "#555", 1.0);
  if (ev > 0.0) fig.line(expanded, "#999", 1.0, "4 3", "expanded lane");
  fig.line(car, "#1f77b4", 1.8, "", "vehicle c.g.");
  if (meta.contains("obstacle")) {
    const json& o = meta["obstacle"];
    fig.circle(o["x"], o["y"], o["radius"], "#d62728", "rgba(214,39,40,0.25)");
  }
  const std::size_t k = min_h_right_row(log);
  fig.marker(log.rows[k].x, log.rows[k].y, "#000",
             "data-min-h-r=\"" + format_value(log.rows[k].h_right) + "\"");
  fig.text(log.rows[k].x, log.rows[k].y, "min h_r = " + format_value(log.rows[k].h_right));
  fig.save(path);
}

inline void control_plot(const std::vector<std::pair<std::string, SimLog>>& logs,
                         const std::string& path) {
  svg::Figure fig(900, 420, "steering input");
  fig.labels("t [s]", "u [rad]");
  std::vector<svg::Series> all;
  double t0 = std::numeric_limits<double>::infinity(), t1 = -t0;
  for (const auto& [name, log] : logs) {
    if (std::isfinite(log.summary.detection_time)) {
      t0 = std::min(t0, log.summary.detection_time - 1.0);
      t1 = std::max(t1, log.summary.detection_time + 6.0);
    }
  }
  for (const auto& [name, log] : logs) {
    svg::Series applied, nominal;
    for (const SimRow& r : log.rows) {
      if (std::isfinite(t0) && (r.t < t0 || r.t > t1)) continue;
      applied.emplace_back(r.t, r.u_applied);
      nominal.emplace_back(r.t, r.u_mpc);
    }
    all.push_back(applied);
    all.push_back(nominal);
  }
  fig.fit(all);
  for (std::size_t i = 0; i < logs.size(); ++i) {
    fig.line(all[2 * i + 1], palette(i), 1.0, "5 3", logs[i].first + " (MPC)");
    fig.line(all[2 * i], palette(i), 1.8, "", logs[i].first + " (applied)");
    // Mark the first instant the filter overrides the MPC input.
    for (const SimRow& r : logs[i].second.rows) {
      if (std::abs(r.u_safe - r.u_mpc) > 1e-9) {
        fig.marker(r.t, r.u_applied, palette(i), "data-override-start=\"1\"");
        break;
      }
    }
  }
  fig.save(path);
}

inline int cmd_plots(const std::string& dir, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> csvs;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.path().extension() == ".csv") csvs.push_back(entry.path());
  }
  if (ec) {
    err << dir << ": " << ec.message() << '\n';
    return kConfigError;
  }
  std::sort(csvs.begin(), csvs.end());
  if (csvs.empty()) {
    err << dir << ": no CSV logs found\n";
    return kConfigError;
  }
  std::vector<std::pair<std::string, SimLog>> logs;
  std::vector<json> metas;
  for (const fs::path& p : csvs) {
    try {
      logs.emplace_back(p.stem().string(), read_csv_file(p.string()));
      fs::path meta_path = p;
      meta_path.replace_extension(".meta.json");
      json meta = json::object();
      if (fs::exists(meta_path)) meta = json::parse(read_text_file(meta_path.string()));
      metas.push_back(meta);
    } catch (const std::exception& e) {
      err << p.string() << ": " << e.what() << '\n';
      return kConfigError;
    }
  }
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const std::string path = (fs::path(dir) / (logs[i].first + "_trajectory.svg")).string();
    trajectory_plot(logs[i].first, logs[i].second, metas[i], path);
    out << path << '\n';
  }
  const std::string path = (fs::path(dir) / "controls.svg").string();
  control_plot(logs, path);
  out << path << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Lane keeping and obstacle avoidance with MPC and barrier safety filters"};
  app.require_subcommand(1);

  std::vector<std::string> validate_files;
  auto* validate = app.add_subcommand("validate", "Parse and audit scenario or hook files");
  validate->add_option("files", validate_files, "Scenario files")->required();

  std::vector<std::string> run_files;
  std::string out_dir;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  auto* run = app.add_subcommand("run", "Simulate scenarios and write CSV logs");
  run->add_option("files", run_files, "Scenario files")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--jobs", jobs, "Parallel workers");

  std::string cmp_a, cmp_b;
  auto* compare = app.add_subcommand("compare", "Paired metrics of two logs or scenarios");
  compare->add_option("a", cmp_a, "First log or scenario")->required();
  compare->add_option("b", cmp_b, "Second log or scenario")->required();

  std::string plot_dir;
  auto* plots = app.add_subcommand("plots", "Write SVG figures for the logs in a directory");
  plots->add_option("dir", plot_dir, "Log directory")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kConfigError;
  }

  if (*validate) return cmd_validate(validate_files, out, err);
  if (*run) return cmd_run(run_files, out_dir, jobs, out, err);
  if (*compare) return cmd_compare(cmp_a, cmp_b, out, err);
  if (*plots) return cmd_plots(plot_dir, out, err);
  return kConfigError;
}

}  // namespace lanesafe::cli
