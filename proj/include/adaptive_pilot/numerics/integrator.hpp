#pragma once

#include <string>

#include "adaptive_pilot/numerics/matrix.hpp"

namespace adaptive_pilot::numerics {

/// One classical fourth-order Runge-Kutta step of x' = f(t, x).
///
/// Delay systems are handled by letting `f` read history buffers; stage
/// times lie in [t, t + h], so any delayed lookup with lag >= h touches
/// committed samples only. The caller appends to its histories once per
/// step after this returns.
template <class System>
Vector rk4_step(System&& f, double t, const Vector& x, double h) {
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * h, Vector(x + 0.5 * h * k1));
    const Vector k3 = f(t + 0.5 * h, Vector(x + 0.5 * h * k2));
    const Vector k4 = f(t + h, Vector(x + h * k3));
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// rk4_step plus the step-size and finiteness contract of the delay solver.
/// `min_lag` is the smallest positive delay read by `f` (0 for delay-free).
template <class System>
Vector integrate_step(System&& f, const Vector& x, double t, double h, double min_lag = 0.0) {
    if (!(h > 0.0)) throw StepTooLarge("integrate_step: step must be positive");
    if (min_lag > 0.0 && h > min_lag * (1.0 + 1e-9)) {
        throw StepTooLarge("integrate_step: step " + std::to_string(h) +
                           " exceeds smallest delay " + std::to_string(min_lag));
    }
    Vector next = rk4_step(std::forward<System>(f), t, x, h);
    if (!next.allFinite()) throw NonFiniteState(t + h, "state");
    return next;
}

}  // namespace adaptive_pilot::numerics
