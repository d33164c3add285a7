#include "props_common.hpp"

#include "cryo/noise.hpp"
#include "cryo/units.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace cryo::props {

Results noise_properties(std::uint64_t seed, int cases)
{
    Results out;
    const std::string mod = "noise";

    out.push_back(run_property(mod, "filter function integrates to pi/t", seed, cases, [](Rng& rng, int) -> Outcome {
        const double t = log_uniform(rng, 1e-3, 1e3);
        if (std::abs(filter_g0(1e-12 / t, t) - 1.0) > 1e-12)
            return msg("g0 near zero frequency = ", filter_g0(1e-12 / t, t));
        // substitute omega = 2u/t; Simpson on [0, U] plus the averaged tail 1/(2U)
        const double U = 2000.0, du = 0.01;
        const int n = static_cast<int>(std::lround(U / du));
        double sum = filter_g0(0.0, t) + filter_g0(2.0 * U / t, t);
        for (int k = 1; k < n; ++k)
            sum += (k % 2 ? 4.0 : 2.0) * filter_g0(2.0 * k * du / t, t);
        const double integral = (2.0 / t) * (sum * du / 3.0 + 1.0 / (2.0 * U));
        const double expect = std::numbers::pi / t;
        if (std::abs(integral / expect - 1.0) > 1e-5)
            return msg("integral ", integral, " vs pi/t = ", expect, " at t = ", t);
        return {};
    }));

    out.push_back(run_property(mod, "chi0 scales with the square of the amplitude", seed, cases,
                               [](Rng& rng, int) -> Outcome {
        NoiseSpec a;
        a.A_1Hz = log_uniform(rng, 0.01, 10.0);
        a.f_low = log_uniform(rng, 0.1, 100.0);
        a.f_high = a.f_low * log_uniform(rng, 1e3, 1e12);
        NoiseSpec b = a;
        const double c = log_uniform(rng, 0.01, 100.0);
        b.A_1Hz = c * a.A_1Hz;
        const double t = log_uniform(rng, 1e-3, 10.0), tc = ghz_to_rad(log_uniform(rng, 0.05, 1.0));
        const double eps = tc * log_uniform(rng, 0.01, 100.0) * (uniform_int(rng, 0, 1) ? 1.0 : -1.0);
        const double x = chi0(t, eps, tc, a), y = chi0(t, eps, tc, b);
        if (std::abs(y / (c * c * x) - 1.0) > 16.0 * std::numeric_limits<double>::epsilon())
            return msg("chi0 ratio ", y / x, " vs c^2 = ", c * c);
        return {};
    }));

    out.push_back(run_property(mod, "detuning sensitivity matches finite differences", seed, cases,
                               [](Rng& rng, int) -> Outcome {
        const double tc = ghz_to_rad(log_uniform(rng, 0.01, 2.0));
        const double eps = tc * log_uniform(rng, 0.01, 100.0) * (uniform_int(rng, 0, 1) ? 1.0 : -1.0);
        const double h = 1e-4 * std::min(std::abs(eps), tc);
        auto wq = [tc](double e) { return std::hypot(e, tc); };
        const double d = (wq(eps + h) - wq(eps - h)) / (2.0 * h);
        const double got = detuning_sensitivity_sq(eps, tc);
        if (std::abs(got / (d * d) - 1.0) > 1e-6)
            return msg("sensitivity ", got, " vs finite difference ", d * d, " at eps/t_c = ", eps / tc);
        return {};
    }));

    out.push_back(run_property(mod, "coherence starts at one and does not increase", seed, cases,
                               [](Rng& rng, int) -> Outcome {
        NoiseSpec s;
        s.A_1Hz = log_uniform(rng, 0.1, 5.0);
        const double tc = ghz_to_rad(log_uniform(rng, 0.05, 1.0));
        const double eps = tc * uniform(rng, -20.0, 20.0);
        const int n = uniform_int(rng, 5, 40);
        Eigen::VectorXd t(n);
        t[0] = 0.0;
        for (int i = 1; i < n; ++i)
            t[i] = t[i - 1] + log_uniform(rng, 1e-3, 0.2);
        const CoherenceCurve c = coherence_chi0(t, eps, tc, s);
        if (c.coherence[0] != 1.0)
            return msg("coherence(0) = ", c.coherence[0]);
        for (int i = 1; i < n; ++i)
            if (c.coherence[i] > c.coherence[i - 1] + 1e-6)
                return msg("coherence rises at t = ", t[i]);
        return {};
    }));
    return out;
}

} // namespace cryo::props
