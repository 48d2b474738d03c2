#pragma once

#include <string>

#include <Eigen/Dense>

#include "lanesafe/errors.hpp"

namespace lanesafe::numerics {

/// Residual of the discrete algebraic Riccati equation
///   P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q
/// measured in the max-abs norm.
inline double dare_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                            const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                            const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd btpa = b.transpose() * p * a;
  const Eigen::MatrixXd s = r + b.transpose() * p * b;
  const Eigen::MatrixXd rhs =
      a.transpose() * p * a - btpa.transpose() * s.ldlt().solve(btpa) + q;
  return (rhs - p).cwiseAbs().maxCoeff();
}

/**
 * Stabilizing solution of the DARE.
 *
 * A structure-preserving doubling iteration gives quadratic convergence from
 * P = Q; a short fixed-point polish afterwards removes round-off accumulated
 * in the doubling products. Throws NumericalError with the achieved residual
 * when the tolerance is not met within the iteration budget.
 */
inline Eigen::MatrixXd solve_dare(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                  const Eigen::MatrixXd& q, const Eigen::MatrixXd& r,
                                  double tolerance = 1e-10, int max_iterations = 10000) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols()) {
    throw DomainError("solve_dare: dimension mismatch");
  }
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);

  Eigen::MatrixXd ak = a;
  Eigen::MatrixXd gk = b * r.ldlt().solve(b.transpose());
  Eigen::MatrixXd hk = q;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    const auto w = (identity + gk * hk).partialPivLu();
    const Eigen::MatrixXd w_inv_a = w.solve(ak);
    const Eigen::MatrixXd w_inv_g = w.solve(gk);
    const Eigen::MatrixXd h_next = hk + ak.transpose() * hk * w_inv_a;
    gk = gk + ak * w_inv_g * ak.transpose();
    ak = ak * w_inv_a;
    const double change = (h_next - hk).cwiseAbs().maxCoeff();
    hk = 0.5 * (h_next + h_next.transpose());
    if (!hk.allFinite()) {
      throw NumericalError("solve_dare: doubling iteration diverged");
    }
    if (change <= 1e-14 * std::max(1.0, hk.cwiseAbs().maxCoeff())) break;
  }

  Eigen::MatrixXd p = hk;
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd btpa = b.transpose() * p * a;
    const Eigen::MatrixXd s = r + b.transpose() * p * b;
    Eigen::MatrixXd next = a.transpose() * p * a - btpa.transpose() * s.ldlt().solve(btpa) + q;
    next = 0.5 * (next + next.transpose());
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change == 0.0) break;
  }

  const double residual = dare_residual(a, b, q, r, p);
  if (!(residual <= tolerance * std::max(1.0, p.cwiseAbs().maxCoeff()))) {
    throw NumericalError("solve_dare: residual " + std::to_string(residual) +
                         " above tolerance after " + std::to_string(iter) + " iterations");
  }
  return p;
}

/// LQR gain K = (R + B'PB)^-1 B'PA for u = -K x.
inline Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                const Eigen::MatrixXd& r, const Eigen::MatrixXd& p) {
  const Eigen::MatrixXd s = r + b.transpose() * p * b;
  return s.ldlt().solve(b.transpose() * p * a);
}

}  // namespace lanesafe::numerics
