#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lanesafe/errors.hpp"

namespace lanesafe::numerics {

/**
 * Dense convex quadratic program
 *
 *   minimize    1/2 z' H z + q' z
 *   subject to  F z <= g
 *
 * with H symmetric positive definite (a 1e-9 diagonal shift is applied when
 * the Cholesky factorization of H fails).
 */
struct QpProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd constraint_matrix;  // m x n, may have zero rows
  Eigen::VectorXd constraint_bound;   // m
};

enum class QpStatus { kOptimal, kInfeasible, kIterationLimit };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kInfeasible:
      return "infeasible";
    case QpStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "unknown";
}

struct QpSolution {
  Eigen::VectorXd z;
  std::vector<int> active_set;
  Eigen::VectorXd multipliers;  // one per constraint row, zero when inactive
  QpStatus status = QpStatus::kIterationLimit;
  int iterations = 0;

  bool optimal() const { return status == QpStatus::kOptimal; }
};

/// KKT residuals of a candidate primal-dual pair.
struct KktResiduals {
  double stationarity = 0.0;     // |H z + q + F' lambda|_inf
  double primal = 0.0;           // max(F z - g, 0)
  double complementarity = 0.0;  // |lambda' (F z - g)|
  double dual = 0.0;             // max(-lambda, 0)
};

inline KktResiduals kkt_residuals(const QpProblem& p, const Eigen::VectorXd& z,
                                  const Eigen::VectorXd& lambda) {
  KktResiduals r;
  const Eigen::Index m = p.constraint_matrix.rows();
  Eigen::VectorXd grad = p.hessian * z + p.gradient;
  if (m > 0) {
    grad += p.constraint_matrix.transpose() * lambda;
    const Eigen::VectorXd slack = p.constraint_matrix * z - p.constraint_bound;
    r.primal = std::max(0.0, slack.maxCoeff());
    r.complementarity = std::abs(lambda.dot(slack));
    r.dual = std::max(0.0, -lambda.minCoeff());
  }
  r.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

namespace detail {

inline void validate(const QpProblem& p) {
  const Eigen::Index n = p.hessian.rows();
  if (p.hessian.cols() != n || p.gradient.size() != n) {
    throw DomainError("solve_qp: Hessian/gradient dimension mismatch");
  }
  if (p.constraint_matrix.rows() != p.constraint_bound.size() ||
      (p.constraint_matrix.rows() > 0 && p.constraint_matrix.cols() != n)) {
    throw DomainError("solve_qp: constraint dimension mismatch");
  }
  const double scale = std::max(1.0, p.hessian.cwiseAbs().maxCoeff());
  if ((p.hessian - p.hessian.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw DomainError("solve_qp: Hessian is not symmetric");
  }
}

}  // namespace detail

/**
 * Dual active-set method of Goldfarb and Idnani.
 *
 * Starts from the unconstrained minimizer and repeatedly adds the most violated
 * constraint (lowest index on ties), dropping active constraints whose
 * multiplier would turn negative. A violated constraint that is linearly
 * dependent on the active set with no droppable multiplier certifies
 * infeasibility. The iteration count is bounded by 50 (n + m).
 */
inline QpSolution solve_qp(const QpProblem& p) {
  detail::validate(p);
  const Eigen::Index n = p.hessian.rows();
  const Eigen::Index m = p.constraint_matrix.rows();

  Eigen::LLT<Eigen::MatrixXd> llt(p.hessian);
  if (llt.info() != Eigen::Success) {
    llt.compute(p.hessian + 1e-9 * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) {
      throw DomainError("solve_qp: Hessian is not positive definite");
    }
  }
  const Eigen::MatrixXd lower = llt.matrixL();

  QpSolution sol;
  sol.z = llt.solve(-p.gradient);
  sol.multipliers = Eigen::VectorXd::Zero(m);

  std::vector<int> active;
  std::vector<double> lambda;
  const int max_iterations = static_cast<int>(50 * (n + m));

  const auto tolerance = [&](Eigen::Index i) {
    return 1e-11 * (1.0 + std::abs(p.constraint_bound(i)) +
                    p.constraint_matrix.row(i).cwiseAbs().dot(sol.z.cwiseAbs()));
  };

  while (true) {
    // Most violated constraint, lowest index on ties.
    Eigen::Index entering = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(active.begin(), active.end(), static_cast<int>(i)) != active.end()) {
        continue;
      }
      const double s = p.constraint_matrix.row(i).dot(sol.z) - p.constraint_bound(i);
      if (s > tolerance(i) && s > worst) {
        worst = s;
        entering = i;
      }
    }
    if (entering < 0) {
      sol.status = QpStatus::kOptimal;
      break;
    }

    double lambda_entering = 0.0;
    bool added = false;
    while (!added) {
      if (++sol.iterations > max_iterations) {
        sol.status = QpStatus::kIterationLimit;
        goto finish;
      }
      const Eigen::VectorXd normal = p.constraint_matrix.row(entering).transpose();
      const Eigen::VectorXd n_hat = lower.triangularView<Eigen::Lower>().solve(normal);
      const auto k = static_cast<Eigen::Index>(active.size());

      Eigen::VectorXd projected = n_hat;
      Eigen::VectorXd dlambda(k);
      if (k > 0) {
        Eigen::MatrixXd scaled(n, k);
        for (Eigen::Index j = 0; j < k; ++j) {
          scaled.col(j) = lower.triangularView<Eigen::Lower>().solve(
              p.constraint_matrix.row(active[j]).transpose());
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(scaled);
        const Eigen::MatrixXd q1 =
            qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
        const Eigen::MatrixXd r1 =
            qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        const Eigen::VectorXd coeff = q1.transpose() * n_hat;
        projected -= q1 * coeff;
        dlambda = -r1.triangularView<Eigen::Upper>().solve(coeff);
      }
      const Eigen::VectorXd dz =
          -lower.transpose().triangularView<Eigen::Upper>().solve(projected);

      const double rate = projected.squaredNorm();
      const double violation =
          p.constraint_matrix.row(entering).dot(sol.z) - p.constraint_bound(entering);
      constexpr double kInf = std::numeric_limits<double>::infinity();
      const double full_step =
          rate > 1e-14 * std::max(1.0, n_hat.squaredNorm()) ? violation / rate : kInf;

      double partial_step = kInf;
      Eigen::Index blocking = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (dlambda(j) < 0.0) {
          const double step = lambda[j] / -dlambda(j);
          if (step < partial_step) {
            partial_step = step;
            blocking = j;
          }
        }
      }

      if (full_step == kInf && partial_step == kInf) {
        sol.status = QpStatus::kInfeasible;
        goto finish;
      }

      const double step = std::min(full_step, partial_step);
      if (full_step != kInf) {
        sol.z += step * dz;
      }
      for (Eigen::Index j = 0; j < k; ++j) {
        lambda[j] += step * dlambda(j);
      }
      lambda_entering += step;

      if (full_step <= partial_step) {
        active.push_back(static_cast<int>(entering));
        lambda.push_back(lambda_entering);
        added = true;
      } else {
        active.erase(active.begin() + blocking);
        lambda.erase(lambda.begin() + blocking);
      }
    }
  }

finish:
  for (std::size_t j = 0; j < active.size(); ++j) {
    sol.multipliers(active[j]) = std::max(0.0, lambda[j]);
  }
  sol.active_set = active;
  std::sort(sol.active_set.begin(), sol.active_set.end());
  return sol;
}

}  // namespace lanesafe::numerics
