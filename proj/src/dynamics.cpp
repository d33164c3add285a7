#include "cryo/dynamics.hpp"

#include "cryo/ode.hpp"
#include "cryo/units.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace cryo {

TwoLevelParams TwoLevelParams::from_ghz(double eps0_ghz, double t_c_ghz, double kappa_ghz)
{
    TwoLevelParams p{ghz_to_rad(eps0_ghz), ghz_to_rad(t_c_ghz), ghz_to_rad(kappa_ghz)};
    p.validate();
    return p;
}

void TwoLevelParams::validate() const
{
    if (!std::isfinite(eps0) || !std::isfinite(t_c) || !std::isfinite(kappa))
        throw std::invalid_argument("TwoLevelParams: non-finite value");
    if (t_c < 0.0)
        throw std::invalid_argument("TwoLevelParams: t_c must be >= 0");
    if (!(kappa > 0.0))
        throw std::invalid_argument("TwoLevelParams: kappa must be > 0");
}

BlochState ground_state(double x, double t_c)
{
    const double om = std::hypot(x, t_c);
    if (om == 0.0)
        return {0.0, 0.0, 1.0};
    return {-t_c / om, 0.0, 1.0 + x / om};
}

namespace {

using V3 = Eigen::Vector3d;

template <typename Observer>
V3 run_bloch(const TwoLevelParams& p, const Waveform& detuning, const BlochState& init, double rel_tol,
             Observer&& observe)
{
    p.validate();
    validate(detuning);
    if (!(rel_tol > 1e-12 && rel_tol < 1e-2))
        throw std::invalid_argument("integrate_lindblad: rel_tol must lie in (1e-12, 1e-2)");

    DopriOptions opt;
    opt.rel_tol = rel_tol;
    opt.abs_tol = rel_tol * 1e-3;

    const double dt = detuning.sample_period;
    V3 y(init.u, init.v, init.w);
    observe(0, y);
    double h = 0.0;
    for (Eigen::Index k = 0; k + 1 < detuning.size(); ++k) {
        const double t_k = detuning.time(k);
        const double x_k = detuning[k] - p.eps0;
        const double slope = (detuning[k + 1] - detuning[k]) / dt;
        auto rhs = [&](double t, const V3& s) {
            const double x = x_k + slope * (t - t_k);
            return V3(-p.kappa * s[0] + x * s[1], -x * s[0] - p.kappa * s[1] - p.t_c * (s[2] - 1.0),
                      p.t_c * s[1]);
        };
        try {
            dopri_advance(rhs, t_k, detuning.time(k + 1), y, h, opt);
        } catch (const IntegrationError& e) {
            throw IntegrationError(std::string(e.what()) + " in detuning segment " + std::to_string(k));
        }
        observe(k + 1, y);
    }
    return y;
}

} // namespace

DynamicsResult integrate_lindblad(const TwoLevelParams& p, const Waveform& detuning, const BlochState& init,
                                  double rel_tol)
{
    DynamicsResult r;
    r.times.reserve(static_cast<size_t>(detuning.size()));
    r.states.reserve(static_cast<size_t>(detuning.size()));
    const V3 y = run_bloch(p, detuning, init, rel_tol, [&](Eigen::Index k, const V3& s) {
        r.times.push_back(detuning.time(k));
        r.states.push_back({s[0], s[1], s[2]});
    });
    r.final_w = y[2];
    return r;
}

double lindblad_final_w(const TwoLevelParams& p, const Waveform& detuning, const BlochState& init,
                        double rel_tol)
{
    return run_bloch(p, detuning, init, rel_tol, [](Eigen::Index, const V3&) {})[2];
}

double numerical_rate(const BlochState& s, double t_c)
{
    return -t_c * s.v / (s.w - 1.0);
}

double gamma_steady(double eps, const TwoLevelParams& p)
{
    const double x = eps - p.eps0;
    return p.kappa * p.t_c * p.t_c / (p.kappa * p.kappa + x * x);
}

double gamma_first_order(double eps, double eps_dot, const TwoLevelParams& p)
{
    const double x = eps - p.eps0;
    const double tc2 = p.t_c * p.t_c;
    const double D = x * x + p.kappa * p.kappa;
    if (D - tc2 <= 0.0)
        throw SingularRegimeError("gamma_first_order: D <= t_c^2, use integrate_lindblad");
    return tc2 * (p.kappa * D + x * eps_dot) / (D * (D - tc2));
}

double gamma_first_order_consistent(double eps, double eps_dot, const TwoLevelParams& p)
{
    const double x = eps - p.eps0;
    const double k2 = p.kappa * p.kappa;
    const double tc2 = p.t_c * p.t_c;
    const double D = x * x + k2;
    const double den = D * (D * D + tc2 * (x * x - k2));
    if (den <= 0.0)
        throw SingularRegimeError("gamma_first_order_consistent: singular denominator");
    return tc2 * (p.kappa * D * D - eps_dot * x * (x * x - 3.0 * k2)) / den;
}

double relaxation_signal(const Waveform& detuning, const TwoLevelParams& p, RateModel model)
{
    validate(detuning);
    p.validate();
    const Eigen::Index n = detuning.size();
    const double dt = detuning.sample_period;
    auto eps_dot = [&](Eigen::Index k) {
        if (n < 2)
            return 0.0;
        if (k == 0)
            return (detuning[1] - detuning[0]) / dt;
        if (k == n - 1)
            return (detuning[n - 1] - detuning[n - 2]) / dt;
        return (detuning[k + 1] - detuning[k - 1]) / (2.0 * dt);
    };
    auto rate = [&](Eigen::Index k) {
        switch (model) {
        case RateModel::steady:
            return gamma_steady(detuning[k], p);
        case RateModel::first_order:
            return gamma_first_order(detuning[k], eps_dot(k), p);
        case RateModel::first_order_consistent:
            return gamma_first_order_consistent(detuning[k], eps_dot(k), p);
        }
        return 0.0;
    };
    double integral = 0.0;
    double prev = rate(0);
    for (Eigen::Index k = 1; k < n; ++k) {
        const double cur = rate(k);
        integral += 0.5 * dt * (prev + cur);
        prev = cur;
    }
    return 1.0 - std::exp(-integral);
}

namespace {

void check_monotone(const StepFunction& s, double t)
{
    constexpr int n = 2000;
    double prev = s(0.0);
    for (int k = 1; k <= n; ++k) {
        const double cur = s(t * k / n);
        if (!std::isfinite(cur))
            throw PreconditionError("step function is not finite at t = " + std::to_string(t * k / n));
        if (cur < prev - 1e-12 * std::max(1.0, std::abs(prev)))
            throw PreconditionError("step function decreases near t = " + std::to_string(t * k / n)
                                    + " ns; the relaxation integral assumes a monotone response");
        prev = cur;
    }
}

template <typename F>
double adaptive_simpson(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (depth <= 0 || std::abs(diff) <= 15.0 * tol)
        return left + right + diff / 15.0;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace

double daps_signal_integral(double t, double eps_amp, const StepFunction& s, const TwoLevelParams& p)
{
    p.validate();
    if (!(eps_amp > 0.0))
        throw std::invalid_argument("daps_signal_integral: eps_amp must be > 0");
    if (!(t > 0.0))
        return 0.0;
    check_monotone(s, t);
    auto g = [&](double tau) { return gamma_steady(eps_amp * s(tau), p); };
    // split into pieces so a narrow resonance crossing cannot hide between the first nodes
    constexpr int pieces = 64;
    double total = 0.0;
    for (int k = 0; k < pieces; ++k) {
        const double a = t * k / pieces, b = t * (k + 1) / pieces;
        const double fa = g(a), fb = g(b), fm = g(0.5 * (a + b));
        const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += adaptive_simpson(g, a, b, fa, fm, fb, whole, 1e-12, 40);
    }
    return 1.0 - std::exp(-total);
}

double daps_signal_delta(double t, double eps_amp, const StepFunction& s, const TwoLevelParams& p)
{
    p.validate();
    if (!(eps_amp > 0.0))
        throw std::invalid_argument("daps_signal_delta: eps_amp must be > 0");
    if (t < 0.0)
        return 0.0;
    const double target = p.eps0 / eps_amp;
    if (s(t) < target)
        return 0.0;
    if (s(0.0) >= target)
        return 0.0; // crossing by a jump: infinite sweep rate, no transition
    // Bisect down to adjacent doubles so t' (and hence w) does not depend on t.
    double lo = 0.0, hi = t;
    for (int i = 0; i < 2100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        (s(mid) >= target ? hi : lo) = mid;
    }
    const double tp = hi;
    const double h = 1e-7 * std::max(tp, 1e-3);
    double slope;
    if (tp - h < 0.0)
        slope = (s(tp + h) - s(tp)) / h;
    else
        slope = (s(tp + h) - s(tp - h)) / (2.0 * h);
    const double eps_dot = eps_amp * slope;
    if (!(eps_dot > 0.0))
        return 1.0;
    return 1.0 - std::exp(-std::numbers::pi * p.t_c * p.t_c / eps_dot);
}

} // namespace cryo
