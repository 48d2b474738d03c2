#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lanesafe/errors.hpp"
#include "lanesafe/numerics/lp.hpp"

namespace lanesafe::numerics {

/// H-representation {z : F z <= g}. A polytope with zero rows is the whole
/// space of dimension `dim`.
struct Polytope {
  Eigen::MatrixXd f;
  Eigen::VectorXd g;
  Eigen::Index dim = 0;

  Polytope() = default;
  Polytope(Eigen::MatrixXd rows, Eigen::VectorXd bounds)
      : f(std::move(rows)), g(std::move(bounds)), dim(f.cols()) {
    if (f.rows() != g.size()) throw DomainError("Polytope: row/bound mismatch");
  }

  static Polytope whole_space(Eigen::Index n) {
    Polytope p;
    p.f.resize(0, n);
    p.g.resize(0);
    p.dim = n;
    return p;
  }

  /// Axis-aligned box {|z_j| <= half_width_j}.
  static Polytope symmetric_box(const Eigen::VectorXd& half_width) {
    const Eigen::Index n = half_width.size();
    Eigen::MatrixXd f(2 * n, n);
    f << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd g(2 * n);
    g << half_width, half_width;
    return {f, g};
  }

  Eigen::Index rows() const { return f.rows(); }

  bool contains(const Eigen::VectorXd& z, double tol = 1e-9) const {
    if (rows() == 0) return true;
    return ((f * z - g).array() <= tol * (1.0 + g.array().abs())).all();
  }

  Polytope intersect(const Polytope& other) const {
    if (other.dim != dim) throw DomainError("Polytope::intersect: dimension mismatch");
    Eigen::MatrixXd rows(f.rows() + other.f.rows(), dim);
    Eigen::VectorXd bounds(g.size() + other.g.size());
    rows << f, other.f;
    bounds << g, other.g;
    Polytope out(rows, bounds);
    out.dim = dim;
    return out;
  }
};

/// Support function of the symmetric box W = {|w_j| <= hw_j} evaluated at
/// direction `row`.
inline double box_support(const Eigen::VectorXd& row, const Eigen::VectorXd& half_width) {
  return row.cwiseAbs().dot(half_width);
}

/**
 * Robust one-step pre-image of P under e+ = A_cl e - w, w in the box W:
 *   {e : F A_cl e <= g - sup_{w in W} F(-w)}.
 * Rows whose normal vanishes are dropped when trivially satisfied; a vanishing
 * row with a negative bound makes the result empty and is kept as 0 <= g.
 */
inline Polytope polytope_robust_pre(const Polytope& p, const Eigen::MatrixXd& a_cl,
                                    const Eigen::VectorXd& w_half_width) {
  Eigen::MatrixXd rows = p.f * a_cl;
  Eigen::VectorXd bounds = p.g;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    bounds(i) -= box_support(p.f.row(i).transpose(), w_half_width);
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (rows.row(i).cwiseAbs().maxCoeff() > 1e-13 || bounds(i) < 0.0) keep.push_back(i);
  }
  Polytope out;
  out.dim = p.dim;
  out.f.resize(static_cast<Eigen::Index>(keep.size()), p.dim);
  out.g.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.f.row(static_cast<Eigen::Index>(k)) = rows.row(keep[k]);
    out.g(static_cast<Eigen::Index>(k)) = bounds(keep[k]);
  }
  return out;
}

inline bool polytope_is_empty(const Polytope& p) {
  if (p.rows() == 0) return false;
  const LpResult r = solve_lp(Eigen::VectorXd::Zero(p.dim), p.f, p.g);
  return r.status == LpStatus::kInfeasible;
}

/// Whether {F_i z <= g_i} is implied by P, certified by maximizing F_i z over P.
inline bool polytope_implies(const Polytope& p, const Eigen::VectorXd& row, double bound,
                             double tol = 1e-9) {
  if (p.rows() == 0) return row.cwiseAbs().maxCoeff() <= 1e-13 && bound >= -tol;
  const LpResult r = solve_lp(row, p.f, p.g);
  if (r.status == LpStatus::kInfeasible) return true;
  if (r.status == LpStatus::kUnbounded) return false;
  return r.value <= bound + tol * (1.0 + std::abs(bound));
}

/// P ⊆ Q, certified row by row with LPs over P.
inline bool polytope_subset(const Polytope& p, const Polytope& q, double tol = 1e-9) {
  if (p.dim != q.dim) throw DomainError("polytope_subset: dimension mismatch");
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    if (!polytope_implies(p, q.f.row(i).transpose(), q.g(i), tol)) return false;
  }
  return true;
}

/// Removes rows implied by the others. A row is tested against the remaining
/// rows plus a relaxed copy of itself so the LP stays bounded.
inline Polytope remove_redundant_rows(const Polytope& p, double tol = 1e-9) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < p.rows(); ++i) keep.push_back(i);
  for (Eigen::Index i = p.rows() - 1; i >= 0; --i) {
    std::vector<Eigen::Index> others;
    for (Eigen::Index k : keep) {
      if (k != i) others.push_back(k);
    }
    Polytope rest;
    rest.dim = p.dim;
    rest.f.resize(static_cast<Eigen::Index>(others.size()) + 1, p.dim);
    rest.g.resize(static_cast<Eigen::Index>(others.size()) + 1);
    for (std::size_t k = 0; k < others.size(); ++k) {
      rest.f.row(static_cast<Eigen::Index>(k)) = p.f.row(others[k]);
      rest.g(static_cast<Eigen::Index>(k)) = p.g(others[k]);
    }
    rest.f.row(rest.f.rows() - 1) = p.f.row(i);
    rest.g(rest.g.size() - 1) = p.g(i) + 1.0;
    const LpResult r = solve_lp(p.f.row(i).transpose(), rest.f, rest.g);
    const bool redundant =
        r.status == LpStatus::kInfeasible ||
        (r.status == LpStatus::kOptimal && r.value <= p.g(i) + tol * (1.0 + std::abs(p.g(i))));
    if (redundant && r.status != LpStatus::kInfeasible) {
      keep.erase(std::find(keep.begin(), keep.end(), i));
    }
  }
  Polytope out;
  out.dim = p.dim;
  out.f.resize(static_cast<Eigen::Index>(keep.size()), p.dim);
  out.g.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.f.row(static_cast<Eigen::Index>(k)) = p.f.row(keep[k]);
    out.g(static_cast<Eigen::Index>(k)) = p.g(keep[k]);
  }
  return out;
}

/// Center and radius of the largest inscribed ball (LP on (z, r)).
inline std::optional<std::pair<Eigen::VectorXd, double>> chebyshev_center(const Polytope& p) {
  const Eigen::Index n = p.dim;
  Eigen::MatrixXd rows(p.rows() + 2, n + 1);
  Eigen::VectorXd bounds(p.rows() + 2);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    rows.row(i).head(n) = p.f.row(i);
    rows(i, n) = p.f.row(i).norm();
    bounds(i) = p.g(i);
  }
  rows.row(p.rows()).setZero();
  rows(p.rows(), n) = -1.0;  // r >= 0
  bounds(p.rows()) = 0.0;
  rows.row(p.rows() + 1).setZero();
  rows(p.rows() + 1, n) = 1.0;  // keep the LP bounded for unbounded sets
  bounds(p.rows() + 1) = 1e6;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c(n) = 1.0;
  const LpResult r = solve_lp(c, rows, bounds);
  if (r.status != LpStatus::kOptimal) return std::nullopt;
  return std::make_pair(Eigen::VectorXd(r.vertex.head(n)), r.vertex(n));
}

/// Hit-and-run sampler over a bounded polytope with nonempty interior.
inline std::vector<Eigen::VectorXd> sample_polytope(const Polytope& p, std::size_t count,
                                                    std::mt19937_64& rng, int burn_in = 50) {
  const auto center = chebyshev_center(p);
  if (!center || center->second <= 0.0) {
    throw DomainError("sample_polytope: polytope has empty interior");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd z = center->first;
  std::vector<Eigen::VectorXd> out;
  out.reserve(count);
  const int total = burn_in + static_cast<int>(count);
  for (int k = 0; k < total; ++k) {
    Eigen::VectorXd dir(p.dim);
    for (Eigen::Index j = 0; j < p.dim; ++j) dir(j) = normal(rng);
    dir.normalize();
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      const double a = p.f.row(i).dot(dir);
      const double slack = p.g(i) - p.f.row(i).dot(z);
      if (a > 1e-15) hi = std::min(hi, slack / a);
      if (a < -1e-15) lo = std::max(lo, slack / a);
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      throw DomainError("sample_polytope: polytope is unbounded");
    }
    z += (lo + (hi - lo) * unit(rng)) * dir;
    if (k >= burn_in) out.push_back(z);
  }
  return out;
}

}  // namespace lanesafe::numerics
