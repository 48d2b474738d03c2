#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "lanesafe/errors.hpp"

namespace lanesafe::numerics {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  double value = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd vertex;
};

namespace detail {

/// Dense simplex tableau in canonical form. The last column holds the
/// right-hand side and the last row holds the reduced costs of a
/// maximization objective (entries are "objective row" coefficients, so a
/// negative entry marks an improving column).
class Tableau {
 public:
  Tableau(Eigen::MatrixXd t, std::vector<int> basis)
      : t_(std::move(t)), basis_(std::move(basis)) {}

  Eigen::MatrixXd& data() { return t_; }
  std::vector<int>& basis() { return basis_; }

  /// Bland's rule simplex on the columns [0, allowed_cols). Returns false
  /// when the objective is unbounded.
  bool optimize(Eigen::Index allowed_cols) {
    const Eigen::Index rows = t_.rows() - 1;
    const Eigen::Index rhs = t_.cols() - 1;
    constexpr double kEps = 1e-11;
    const int limit = 10000;
    for (int iter = 0; iter < limit; ++iter) {
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < allowed_cols; ++j) {
        if (t_(rows, j) < -kEps) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return true;

      Eigen::Index leaving = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double a = t_(i, entering);
        if (a > kEps) {
          const double ratio = t_(i, rhs) / a;
          if (ratio < best_ratio - 1e-12 ||
              (std::abs(ratio - best_ratio) <= 1e-12 && leaving >= 0 &&
               basis_[i] < basis_[leaving])) {
            best_ratio = ratio;
            leaving = i;
          }
        }
      }
      if (leaving < 0) return false;
      pivot(leaving, entering);
    }
    throw NumericalError("solve_lp: simplex iteration limit reached");
  }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index i = 0; i < t_.rows(); ++i) {
      if (i != row && t_(i, col) != 0.0) {
        t_.row(i) -= t_(i, col) * t_.row(row);
      }
    }
    basis_[row] = static_cast<int>(col);
  }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace detail

/**
 * maximize c'z subject to F z <= g, z free.
 *
 * Two-phase dense tableau simplex with Bland's anti-cycling rule. Free
 * variables are split as z = z+ - z-; rows with a negative bound receive an
 * artificial variable for phase one.
 */
inline LpResult solve_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& f,
                         const Eigen::VectorXd& g) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = f.rows();
  if (f.rows() != g.size() || (m > 0 && f.cols() != n)) {
    throw DomainError("solve_lp: dimension mismatch");
  }
  LpResult result;
  if (m == 0) {
    if (c.isZero()) {
      result.status = LpStatus::kOptimal;
      result.value = 0.0;
      result.vertex = Eigen::VectorXd::Zero(n);
    } else {
      result.status = LpStatus::kUnbounded;
    }
    return result;
  }

  std::vector<Eigen::Index> artificial_rows;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (g(i) < 0.0) artificial_rows.push_back(i);
  }
  const auto n_art = static_cast<Eigen::Index>(artificial_rows.size());
  const Eigen::Index n_struct = 2 * n + m;  // z+, z-, slacks
  const Eigen::Index cols = n_struct + n_art + 1;
  const Eigen::Index rhs = cols - 1;

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m + 1, cols);
  std::vector<int> basis(static_cast<std::size_t>(m));
  Eigen::Index art = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double sign = g(i) < 0.0 ? -1.0 : 1.0;
    t.block(i, 0, 1, n) = sign * f.row(i);
    t.block(i, n, 1, n) = -sign * f.row(i);
    t(i, 2 * n + i) = sign;
    t(i, rhs) = sign * g(i);
    if (g(i) < 0.0) {
      t(i, n_struct + art) = 1.0;
      basis[static_cast<std::size_t>(i)] = static_cast<int>(n_struct + art);
      ++art;
    } else {
      basis[static_cast<std::size_t>(i)] = static_cast<int>(2 * n + i);
    }
  }

  detail::Tableau tableau(std::move(t), std::move(basis));
  auto& tab = tableau.data();

  if (n_art > 0) {
    // Phase one: maximize -sum(artificials).
    tab.row(m).setZero();
    for (Eigen::Index a = 0; a < n_art; ++a) tab(m, n_struct + a) = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tableau.basis()[static_cast<std::size_t>(i)] >= n_struct) {
        tab.row(m) -= tab.row(i);
      }
    }
    tableau.optimize(n_struct + n_art);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if (-tab(m, rhs) > 1e-9 * scale) {
      result.status = LpStatus::kInfeasible;
      return result;
    }
    // Drive remaining artificials out of the basis.
    for (Eigen::Index i = 0; i < m; ++i) {
      if (tableau.basis()[static_cast<std::size_t>(i)] < n_struct) continue;
      for (Eigen::Index j = 0; j < n_struct; ++j) {
        if (std::abs(tab(i, j)) > 1e-9) {
          tableau.pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase two objective row: reduced costs for maximizing c'(z+ - z-).
  tab.row(m).setZero();
  tab.block(m, 0, 1, n) = -c.transpose();
  tab.block(m, n, 1, n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    const int b = tableau.basis()[static_cast<std::size_t>(i)];
    if (b < n_struct && tab(m, b) != 0.0) {
      tab.row(m) -= tab(m, b) * tab.row(i);
    }
  }
  // Artificial columns that stayed basic sit on redundant rows; freezing
  // their columns keeps them at zero.
  if (!tableau.optimize(n_struct)) {
    result.status = LpStatus::kUnbounded;
    return result;
  }

  Eigen::VectorXd split = Eigen::VectorXd::Zero(2 * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const int b = tableau.basis()[static_cast<std::size_t>(i)];
    if (b < 2 * n) split(b) = tab(i, rhs);
  }
  result.vertex = split.head(n) - split.tail(n);
  result.value = c.dot(result.vertex);
  result.status = LpStatus::kOptimal;
  return result;
}

}  // namespace lanesafe::numerics
