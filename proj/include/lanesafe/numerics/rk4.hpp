#pragma once

#include <Eigen/Core>

#include "lanesafe/errors.hpp"

namespace lanesafe::numerics {

/// One classical fourth-order Runge-Kutta step of x' = f(t, x).
///
/// Throws NumericalError if any stage derivative is non-finite.
template <typename State, typename Derivative>
State rk4_step(Derivative&& f, const State& x, double t, double dt) {
  if (!(dt > 0.0)) {
    throw DomainError("rk4_step: dt must be positive");
  }
  const auto check = [](const State& k) {
    if (!k.allFinite()) {
      throw NumericalError("rk4_step: non-finite derivative");
    }
    return k;
  };
  const State k1 = check(f(t, x));
  const State k2 = check(f(t + 0.5 * dt, State(x + 0.5 * dt * k1)));
  const State k3 = check(f(t + 0.5 * dt, State(x + 0.5 * dt * k2)));
  const State k4 = check(f(t + dt, State(x + dt * k3)));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace lanesafe::numerics
