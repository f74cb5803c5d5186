#pragma once

#include <cmath>
#include <cstdint>

#include "qmf/errors.hpp"

namespace qmf {

// Uniform grid on [t0, T] with n_steps * dt = T - t0 (within 1e-12).
struct TimeGrid {
    double t0 = 0.0;
    double T = 0.0;
    double dt = 0.0;
    int64_t n_steps = 0;

    static TimeGrid uniform(double T, double dt, double t0 = 0.0) {
        if (!(dt > 0.0) || !(T > t0)) {
            throw GridInvalid("need dt > 0 and T > t0");
        }
        const int64_t n = std::llround((T - t0) / dt);
        TimeGrid g{t0, T, dt, n};
        if (n < 1 || std::fabs(static_cast<double>(n) * dt - (T - t0)) > 1e-12) {
            throw GridInvalid("n_steps * dt != T - t0 within 1e-12");
        }
        return g;
    }

    double t(int64_t step) const { return t0 + static_cast<double>(step) * dt; }
    int64_t n_points() const { return n_steps + 1; }
};

} // namespace qmf
