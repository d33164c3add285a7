#include <doctest.h>

#include "cryo/noise.hpp"
#include "cryo/units.hpp"

#include <cmath>
#include <numbers>

using namespace cryo;

namespace {

const double tc = ghz_to_rad(0.2);

Eigen::VectorXd short_times() { return Eigen::VectorXd::LinSpaced(60, 0.005, 0.3); }

} // namespace

TEST_CASE("filter_g0 limits and zeros")
{
    CHECK(filter_g0(0.0, 3.0) == 1.0);
    CHECK(filter_g0(1e-9, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(filter_g0(two_pi / 2.0, 2.0) == doctest::Approx(0.0).epsilon(1e-30));
    // sinc^2 at x = pi / 2
    CHECK(filter_g0(1.0, std::numbers::pi) == doctest::Approx(4.0 / (std::numbers::pi * std::numbers::pi)));
    // continuity across the small-argument branch
    CHECK(filter_g0(2e-4 * (1 - 1e-9), 1.0) == doctest::Approx(filter_g0(2e-4 * (1 + 1e-9), 1.0)).epsilon(1e-12));
}

TEST_CASE("detuning sensitivity matches finite differences of the qubit frequency")
{
    for (double eps : {-3.0, -0.1, 0.4, 2.0, 25.0}) {
        const double h = 1e-5 * std::max(1.0, std::abs(eps));
        auto wq = [](double e) { return std::sqrt(e * e + tc * tc); };
        const double d = (wq(eps + h) - wq(eps - h)) / (2.0 * h);
        CHECK(detuning_sensitivity_sq(eps, tc) == doctest::Approx(d * d).epsilon(1e-6));
    }
    CHECK(detuning_sensitivity_sq(0.0, tc) == 0.0);
    CHECK(detuning_sensitivity_sq(0.0, 0.0) == 0.0);
}

TEST_CASE("NoiseSpec validation")
{
    NoiseSpec s;
    CHECK_NOTHROW(s.validate());
    s.A_1Hz = 0.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = {};
    s.f_low = 10.0;
    s.f_high = 10.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
    s = {};
    s.f_low = -1.0;
    CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("zero detuning preserves coherence")
{
    const CoherenceCurve c = coherence_chi0(short_times(), 0.0, tc, NoiseSpec{});
    CHECK(c.coherence == Eigen::VectorXd::Ones(c.coherence.size()));
    CHECK(fit_kappa(c).ill_posed);
}

TEST_CASE("doubling the PSD amplitude quadruples chi0")
{
    NoiseSpec a, b;
    b.A_1Hz = 2.0 * a.A_1Hz;
    for (double t : {0.01, 0.1, 1.0})
        CHECK(chi0(t, 3.0, tc, b) == doctest::Approx(4.0 * chi0(t, 3.0, tc, a)).epsilon(1e-13));
    CHECK(chi0(0.0, 3.0, tc, a) == 0.0);
}

TEST_CASE("chi0 matches an independent midpoint quadrature")
{
    const NoiseSpec spec;
    const double t = 0.1, eps = 4.0;
    // midpoint rule in ln f with a fixed, very fine grid
    const int n = 400000;
    const double u0 = std::log(spec.f_low), u1 = std::log(spec.f_high), du = (u1 - u0) / n;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double f = std::exp(u0 + (k + 0.5) * du);
        const double x = std::numbers::pi * f * t * 1e-9;
        const double s = std::sin(x) / x;
        sum += s * s * du;
    }
    const double a = 2.0 * std::numbers::pi * 0.2418;
    const double expect = t * t * eps * eps / (eps * eps + tc * tc) * a * a * 2.0 * std::numbers::pi * sum;
    CHECK(chi0(t, eps, tc, spec) == doctest::Approx(expect).epsilon(2e-4));
}

TEST_CASE("coherence starts at one and does not increase")
{
    Eigen::VectorXd t(61);
    t[0] = 0.0;
    t.tail(60) = short_times();
    const CoherenceCurve c = coherence_chi0(t, 2.0, tc, NoiseSpec{});
    CHECK(c.coherence[0] == 1.0);
    for (Eigen::Index i = 1; i < t.size(); ++i)
        CHECK(c.coherence[i] <= c.coherence[i - 1] + 1e-6);
    CHECK_THROWS_AS(coherence_chi0((Eigen::VectorXd(2) << 0.2, 0.1).finished(), 2.0, tc, NoiseSpec{}),
                    std::invalid_argument);
}

TEST_CASE("fit_kappa recovers a synthetic Gaussian decay")
{
    CoherenceCurve c;
    c.times = Eigen::VectorXd::LinSpaced(80, 0.0, 8.0);
    c.coherence = (-0.1 * c.times.array().square()).exp().matrix();
    const KappaFit f = fit_kappa(c);
    REQUIRE_FALSE(f.ill_posed);
    CHECK(std::abs(f.kappa - 0.1) <= 1e-6);
    CHECK(f.stderr_ < 1e-6);

    CoherenceCurve flat{Eigen::VectorXd::LinSpaced(5, 0.0, 1.0), Eigen::VectorXd::Constant(5, 0.95)};
    CHECK(fit_kappa(flat).ill_posed);
    CHECK_THROWS_AS(fit_kappa(CoherenceCurve{}), std::invalid_argument);
}

TEST_CASE("kappa rises with detuning and saturates")
{
    NoiseSpec spec;
    spec.A_1Hz = 1.0;
    Eigen::VectorXd eps(8);
    for (Eigen::Index i = 0; i < eps.size(); ++i)
        eps[i] = tc * std::pow(2.0, static_cast<double>(i) - 3.0);
    const auto fits = kappa_scan(eps, short_times(), tc, spec, 2);
    for (size_t i = 0; i < fits.size(); ++i)
        REQUIRE_FALSE(fits[i].ill_posed);
    for (size_t i = 1; i < fits.size(); ++i)
        CHECK(fits[i].kappa > fits[i - 1].kappa);
    // The last doubling of |eps| changes kappa by under 2 %, the first by more than 3x.
    CHECK(fits[7].kappa / fits[6].kappa < 1.02);
    CHECK(fits[1].kappa / fits[0].kappa > 3.0);

    const auto serial = kappa_scan(eps, short_times(), tc, spec, 1);
    for (size_t i = 0; i < fits.size(); ++i)
        CHECK(serial[i].kappa == fits[i].kappa);
}
