#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cryo {

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DopriOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double h_max = 0.0; // 0: unbounded
};

/// Adaptive Dormand-Prince 5(4) stepper for fixed-size Eigen state vectors.
/// `h` carries the step size between calls so consecutive segments reuse it.
template <typename Vec, typename Rhs>
void dopri_advance(Rhs& f, double t0, double t1, Vec& y, double& h, const DopriOptions& opt)
{
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    double t = t0;
    const double span = t1 - t0;
    if (span <= 0.0)
        return;
    if (!(h > 0.0))
        h = span;
    const double h_min = 1e-14 * std::max(1.0, std::abs(t1));
    Vec k1 = f(t, y);
    while (t < t1) {
        double hs = std::min(h, t1 - t);
        if (opt.h_max > 0.0)
            hs = std::min(hs, opt.h_max);
        const bool last = (t + hs >= t1);
        const Vec k2 = f(t + c2 * hs, Vec(y + hs * a21 * k1));
        const Vec k3 = f(t + c3 * hs, Vec(y + hs * (a31 * k1 + a32 * k2)));
        const Vec k4 = f(t + c4 * hs, Vec(y + hs * (a41 * k1 + a42 * k2 + a43 * k3)));
        const Vec k5 = f(t + c5 * hs, Vec(y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
        const Vec k6 = f(t + hs, Vec(y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)));
        const Vec y_new = y + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const double t_new = last ? t1 : t + hs;
        const Vec k7 = f(t_new, y_new);
        const Vec err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const auto scale = (opt.abs_tol + opt.rel_tol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs()).array()).eval();
        const double en = std::sqrt((err.array() / scale).square().mean());
        if (!std::isfinite(en))
            throw IntegrationError("integrator: non-finite state at t = " + std::to_string(t));
        if (en <= 1.0) {
            t = t_new;
            y = y_new;
            k1 = k7;
            const double grow = en == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(en, -0.2));
            // keep the carried step unless this one was clipped by the segment end
            if (!last || hs >= h)
                h = hs * std::max(1.0, grow);
        } else {
            h = hs * std::max(0.2, 0.9 * std::pow(en, -0.2));
            if (h < h_min)
                throw IntegrationError("integrator: step size underflow at t = " + std::to_string(t)
                                       + " (h = " + std::to_string(h) + ")");
        }
    }
}

} // namespace cryo
