#pragma once

#include <cstddef>

namespace dobc {

// Classic fixed-step Runge-Kutta 4. State needs State + State and double * State.
// k1 = f(t, y) may be passed in when the caller already evaluated it.
template <class State, class Rhs>
State rk4_step(Rhs&& f, double t, const State& y, double h, const State& k1) {
  State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
  State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
  State k4 = f(t + h, State(y + h * k3));
  return State(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

template <class State, class Rhs>
State rk4_step(Rhs&& f, double t, const State& y, double h) {
  State k1 = f(t, y);
  return rk4_step(f, t, y, h, k1);
}

// Integrates from t0 over `steps` steps of size h; t_k = t0 + k h.
template <class State, class Rhs>
State rk4_integrate(Rhs&& f, double t0, State y, double h, std::size_t steps) {
  for (std::size_t k = 0; k < steps; ++k) y = rk4_step(f, t0 + double(k) * h, y, h);
  return y;
}

}  // namespace dobc
