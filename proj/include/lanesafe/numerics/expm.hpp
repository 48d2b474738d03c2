#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace lanesafe::numerics {

/**
 * Matrix exponential by scaling and squaring with a diagonal Padé
 * approximant of order 8.
 *
 * The argument is scaled by 2^-j so that its infinity norm is at most 1/2;
 * at that norm the [8/8] approximant is accurate well below 1e-15 relative,
 * and the result is recovered by j squarings.
 */
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  constexpr int kOrder = 8;

  const double norm = m.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  }
  const Eigen::MatrixXd a = m / std::ldexp(1.0, squarings);

  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd num = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd den = Eigen::MatrixXd::Identity(n, n);
  double c = 1.0;
  for (int k = 1; k <= kOrder; ++k) {
    c *= static_cast<double>(kOrder - k + 1) /
         static_cast<double>((2 * kOrder - k + 1) * k);
    x = a * x;
    num += c * x;
    den += ((k % 2 == 0) ? c : -c) * x;
  }
  Eigen::MatrixXd result = den.partialPivLu().solve(num);
  for (int k = 0; k < squarings; ++k) {
    result = result * result;
  }
  return result;
}

}  // namespace lanesafe::numerics
