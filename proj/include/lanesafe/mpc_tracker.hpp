#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lanesafe/errors.hpp"
#include "lanesafe/numerics/dare.hpp"
#include "lanesafe/numerics/polytope.hpp"
#include "lanesafe/numerics/qp.hpp"
#include "lanesafe/vehicle_model.hpp"

namespace lanesafe {

using numerics::Polytope;

enum class TerminalMode { kScaledCost, kHardSet };

struct MpcConfig {
  int horizon = 30;
  Matrix4 state_weight = Eigen::Vector4d(10.0, 1.0, 10.0, 1.0).asDiagonal();
  double input_weight = 50.0;
  double terminal_scale = 50.0;  // beta
  double sample_time = 0.05;     // s
  double input_limit = 5.0 * std::numbers::pi / 180.0;  // u_max, rad
  double yaw_rate_bound = 0.015;       // c_psi, rad/s
  double yaw_rate_step_bound = 2e-4;   // c_dpsi, rad/s per sample
  TerminalMode terminal = TerminalMode::kScaledCost;

  void validate(const LateralModel& model) const {
    if (horizon < 1) throw ConfigError("MpcConfig: horizon must be at least 1");
    if (!(sample_time > 0.0)) throw ConfigError("MpcConfig: sample time must be positive");
    if (!(input_weight > 0.0)) throw ConfigError("MpcConfig: input weight must be positive");
    if (!(terminal_scale >= 1.0)) throw ConfigError("MpcConfig: terminal scale must be >= 1");
    if (!(input_limit > 0.0)) throw ConfigError("MpcConfig: input limit must be positive");
    if (!(yaw_rate_bound >= 0.0) || !(yaw_rate_step_bound >= 0.0)) {
      throw ConfigError("MpcConfig: reference bounds must be nonnegative");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix4> eig(state_weight);
    if (!(eig.eigenvalues().minCoeff() > 0.0)) {
      throw ConfigError("MpcConfig: state weight must be positive definite");
    }
    if (!(yaw_rate_bound * std::abs(model.unit_steady_input()) < input_limit)) {
      throw ConfigError("MpcConfig: yaw-rate bound leaves no admissible input margin");
    }
  }
};

/// Per-unit steady-state shift b = A_d x_s + B_d u_s + G_d for a unit change of
/// the reference yaw rate.
inline Vector4 steady_state_shift(const DiscreteModel& d, const LateralModel& m) {
  return d.a * m.unit_steady_state() + d.b * m.unit_steady_input() + d.g;
}

/// Disturbance of the error dynamics caused by the reference change between
/// two samples.
inline Vector4 steady_state_disturbance_w(const DiscreteModel& d, const LateralModel& m,
                                          double yaw_rate_now, double yaw_rate_next) {
  return (yaw_rate_next - yaw_rate_now) * steady_state_shift(d, m);
}

/// Disturbance box W = {|w_j| <= c_dpsi |b_j|} as half widths.
inline Eigen::VectorXd disturbance_half_widths(const DiscreteModel& d, const LateralModel& m,
                                               double yaw_rate_step_bound) {
  return yaw_rate_step_bound * steady_state_shift(d, m).cwiseAbs();
}

/// Admissible correction set |v| <= u_max - c_psi |u_s|.
inline Polytope admissible_correction_set(const LateralModel& m, const MpcConfig& cfg) {
  const double bound = cfg.input_limit - cfg.yaw_rate_bound * std::abs(m.unit_steady_input());
  return Polytope::symmetric_box(Eigen::VectorXd::Constant(1, bound));
}

struct TerminalIngredients {
  Eigen::MatrixXd p;
  Eigen::MatrixXd k;
  double residual = 0.0;
};

inline TerminalIngredients terminal_ingredients(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                                const Eigen::MatrixXd& q, const Eigen::MatrixXd& r) {
  TerminalIngredients out;
  out.p = numerics::solve_dare(a, b, q, r);
  out.k = numerics::lqr_gain(a, b, r, out.p);
  out.residual = numerics::dare_residual(a, b, q, r, out.p);
  return out;
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(m).eigenvalues().cwiseAbs().maxCoeff();
}

struct MicaResult {
  Polytope set;
  int iterations = 0;
  bool converged = false;
  bool empty = false;
};

/**
 * Maximal invariant constraint-admissible set of e+ = (A - B K) e - w, w in the
 * box W, under K e in V.
 *
 * Row blocks F_v K A_cl^j are added with bounds tightened by the support of
 * the accumulated disturbance until a new block is implied by the current
 * set; redundant rows are removed at the end.
 */
inline MicaResult mica_terminal_set(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const Eigen::MatrixXd& k, const Polytope& admissible,
                                    const Eigen::VectorXd& w_half_width, int max_iterations = 200) {
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd a_cl = a - b * k;
  if (!(spectral_radius(a_cl) < 1.0)) {
    throw DomainError("mica_terminal_set: closed loop is not Schur stable");
  }
  if (numerics::polytope_is_empty(admissible)) {
    throw DomainError("mica_terminal_set: admissible input set is empty");
  }

  Polytope block(admissible.f * k, admissible.g);
  block.dim = n;
  block = numerics::polytope_robust_pre(block, Eigen::MatrixXd::Identity(n, n),
                                        Eigen::VectorXd::Zero(n));
  MicaResult out;
  out.set = block;
  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    if (numerics::polytope_is_empty(out.set)) {
      out.empty = true;
      return out;
    }
    block = numerics::polytope_robust_pre(block, a_cl, w_half_width);
    bool implied = true;
    for (Eigen::Index i = 0; i < block.rows() && implied; ++i) {
      implied = numerics::polytope_implies(out.set, block.f.row(i).transpose(), block.g(i));
    }
    if (implied) {
      out.converged = true;
      break;
    }
    out.set = out.set.intersect(block);
  }
  if (numerics::polytope_is_empty(out.set)) {
    out.empty = true;
    return out;
  }
  out.set = numerics::remove_redundant_rows(out.set);
  return out;
}

/// Generic condensed tracking problem e_{i+1} = A e_i + B v_i - w.
struct MpcProblem {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;  // n x 1
  Eigen::MatrixXd q;
  double r = 1.0;
  Eigen::MatrixXd terminal_weight;  // already scaled
  int horizon = 1;
  Eigen::VectorXd initial;
  Eigen::VectorXd disturbance;
  std::vector<double> steady_inputs;   // u_s along the horizon, for the input limit
  std::optional<double> input_limit;
  std::optional<Polytope> terminal_set;
};

struct MpcSolution {
  Eigen::VectorXd moves;                 // v_0 .. v_{N-1}
  std::vector<Eigen::VectorXd> states;   // e_0 .. e_N
  double cost = 0.0;
  bool feasible = false;
  numerics::KktResiduals kkt;
};

inline MpcSolution solve_mpc_problem(const MpcProblem& p) {
  const Eigen::Index n = p.a.rows();
  const int horizon = p.horizon;
  if (horizon < 1) throw DomainError("solve_mpc_problem: horizon must be at least 1");
  if (p.input_limit && static_cast<int>(p.steady_inputs.size()) < horizon) {
    throw DomainError("solve_mpc_problem: steady-input preview shorter than the horizon");
  }
  const Eigen::Index rows = n * horizon;

  Eigen::MatrixXd phi(rows, n);
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(rows, horizon);
  Eigen::VectorXd drift(rows);
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < horizon; ++i) {
    accumulated = p.a * accumulated + p.disturbance;
    power = p.a * power;
    phi.middleRows(i * n, n) = power;
    drift.segment(i * n, n) = -accumulated;
    for (int j = 0; j <= i; ++j) {
      Eigen::MatrixXd col = p.b;
      for (int l = j; l < i; ++l) col = p.a * col;
      gamma.block(i * n, j, n, 1) = col;
    }
  }
  const Eigen::VectorXd free_response = phi * p.initial + drift;

  Eigen::MatrixXd q_bar = Eigen::MatrixXd::Zero(rows, rows);
  for (int i = 0; i + 1 < horizon; ++i) q_bar.block(i * n, i * n, n, n) = p.q;
  q_bar.block((horizon - 1) * n, (horizon - 1) * n, n, n) = p.terminal_weight;

  numerics::QpProblem qp;
  qp.hessian = 2.0 * (gamma.transpose() * q_bar * gamma +
                      p.r * Eigen::MatrixXd::Identity(horizon, horizon));
  qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose()).eval();
  qp.gradient = 2.0 * gamma.transpose() * q_bar * free_response;

  std::vector<Eigen::RowVectorXd> f_rows;
  std::vector<double> g_rows;
  if (p.input_limit) {
    for (int i = 0; i < horizon; ++i) {
      Eigen::RowVectorXd up = Eigen::RowVectorXd::Zero(horizon);
      up(i) = 1.0;
      f_rows.push_back(up);
      g_rows.push_back(*p.input_limit - p.steady_inputs[static_cast<std::size_t>(i)]);
      f_rows.push_back(-up);
      g_rows.push_back(*p.input_limit + p.steady_inputs[static_cast<std::size_t>(i)]);
    }
  }
  if (p.terminal_set) {
    const Polytope& e = *p.terminal_set;
    const Eigen::MatrixXd gamma_n = gamma.bottomRows(n);
    const Eigen::VectorXd free_n = free_response.tail(n);
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
      f_rows.push_back(e.f.row(i) * gamma_n);
      g_rows.push_back(e.g(i) - e.f.row(i).dot(free_n));
    }
  }
  qp.constraint_matrix.resize(static_cast<Eigen::Index>(f_rows.size()), horizon);
  qp.constraint_bound.resize(static_cast<Eigen::Index>(g_rows.size()));
  for (std::size_t i = 0; i < f_rows.size(); ++i) {
    qp.constraint_matrix.row(static_cast<Eigen::Index>(i)) = f_rows[i];
    qp.constraint_bound(static_cast<Eigen::Index>(i)) = g_rows[i];
  }

  const numerics::QpSolution sol = numerics::solve_qp(qp);
  MpcSolution out;
  out.feasible = sol.optimal();
  out.moves = sol.optimal() ? sol.z : Eigen::VectorXd::Zero(horizon);
  if (sol.optimal()) out.kkt = numerics::kkt_residuals(qp, sol.z, sol.multipliers);

  const Eigen::VectorXd stacked = free_response + gamma * out.moves;
  out.states.push_back(p.initial);
  for (int i = 0; i < horizon; ++i) out.states.push_back(stacked.segment(i * n, n));
  out.cost = p.initial.dot(p.q * p.initial) + stacked.dot(q_bar * stacked) +
             p.r * out.moves.squaredNorm();
  return out;
}

struct MpcStep {
  double correction = 0.0;    // v_0
  double steady_input = 0.0;  // u_s
  double input = 0.0;         // u_s + v_0
  bool feasible = true;
  MpcSolution solution;
};

/**
 * Lateral tracking MPC at a fixed sample time. Keeps the previous optimal
 * sequence so an infeasible instant falls back on its shifted tail.
 */
class MpcTracker {
 public:
  MpcTracker(const LateralModel& model, MpcConfig cfg) : model_(model), cfg_(std::move(cfg)) {
    cfg_.validate(model_);
    discrete_ = discretize_zoh(model_, cfg_.sample_time);
    const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, cfg_.input_weight);
    terminal_ = terminal_ingredients(discrete_.a, discrete_.b, cfg_.state_weight, r);
    if (cfg_.terminal == TerminalMode::kHardSet) {
      const MicaResult mica =
          mica_terminal_set(discrete_.a, discrete_.b, terminal_.k,
                            admissible_correction_set(model_, cfg_),
                            disturbance_half_widths(discrete_, model_, cfg_.yaw_rate_step_bound));
      if (mica.empty || !mica.converged) {
        throw ConfigError("MpcTracker: terminal set is empty or did not converge");
      }
      terminal_set_ = mica.set;
    }
  }

  const DiscreteModel& discrete() const { return discrete_; }
  const TerminalIngredients& terminal() const { return terminal_; }
  const std::optional<Polytope>& terminal_set() const { return terminal_set_; }
  const MpcConfig& config() const { return cfg_; }

  /// `preview` holds psi_dot_ref at t_k, t_{k+1}, ... (at least N + 1 values).
  MpcStep step(const Vector4& state, const std::vector<double>& preview) {
    const int horizon = cfg_.horizon;
    if (static_cast<int>(preview.size()) < horizon + 1) {
      throw DomainError("MpcTracker: preview shorter than the horizon");
    }
    const double unit_input = model_.unit_steady_input();
    MpcProblem p;
    p.a = discrete_.a;
    p.b = discrete_.b;
    p.q = cfg_.state_weight;
    p.r = cfg_.input_weight;
    p.terminal_weight = cfg_.terminal_scale * terminal_.p;
    p.horizon = horizon;
    p.initial = state - model_.unit_steady_state() * preview[0];
    p.disturbance = steady_state_disturbance_w(discrete_, model_, preview[0], preview[1]);
    for (int i = 0; i < horizon; ++i) {
      p.steady_inputs.push_back(unit_input * preview[static_cast<std::size_t>(i)]);
    }
    p.input_limit = cfg_.input_limit;
    p.terminal_set = terminal_set_;

    MpcStep out;
    out.solution = solve_mpc_problem(p);
    out.steady_input = p.steady_inputs.front();
    out.feasible = out.solution.feasible;
    if (out.feasible) {
      previous_ = out.solution.moves;
    } else {
      Eigen::VectorXd shifted = Eigen::VectorXd::Zero(horizon);
      if (previous_.size() == horizon) shifted.head(horizon - 1) = previous_.tail(horizon - 1);
      previous_ = shifted;
    }
    out.correction = previous_(0);
    out.input = out.steady_input + out.correction;
    return out;
  }

 private:
  LateralModel model_;
  MpcConfig cfg_;
  DiscreteModel discrete_;
  TerminalIngredients terminal_;
  std::optional<Polytope> terminal_set_;
  Eigen::VectorXd previous_;
};

}  // namespace lanesafe
