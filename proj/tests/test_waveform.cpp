#include <doctest.h>

#include "cryo/waveform.hpp"

#include <cmath>

using namespace cryo;

namespace {

// y[n] = (1 - a) x[n] + a y[n-1], written out independently of the library.
Eigen::VectorXd one_pole_recursion(const Eigen::VectorXd& x, double T, double tau)
{
    const double a = std::exp(-T / tau);
    Eigen::VectorXd y(x.size());
    double prev = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n)
        prev = y[n] = (1.0 - a) * x[n] + a * prev;
    return y;
}

} // namespace

TEST_CASE("waveform construction rejects bad input")
{
    CHECK_THROWS_AS(Waveform(Eigen::VectorXd::Ones(3), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Waveform(Eigen::VectorXd(), 1.0), std::invalid_argument);
    Eigen::VectorXd bad = Eigen::VectorXd::Ones(3);
    bad[1] = std::nan("");
    CHECK_THROWS_AS(Waveform(bad, 1.0), std::invalid_argument);
    const Waveform w(Eigen::VectorXd::Ones(4), 0.5, 2.0);
    CHECK(w.time(3) == doctest::Approx(3.5));
    CHECK(w.end_time() == doctest::Approx(3.5));
}

TEST_CASE("synth_square: 1 ns ramp, 3 ns plateau at 1 GS/s")
{
    const Waveform w = synth_square({1.0, 1.0, 3.0, 0.0, 1.0}, 1.0);
    const Eigen::VectorXd expect = (Eigen::VectorXd(7) << 0, 1, 1, 1, 1, 0, 0).finished();
    REQUIRE(w.size() == expect.size());
    CHECK(w.samples == expect);

    // Finer grid shows the linear edges.
    const Waveform f = synth_square({1.0, 1.0, 3.0, 0.0, 0.0}, 0.25);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == doctest::Approx(0.25));
    CHECK(f[2] == doctest::Approx(0.5));
    CHECK(f[4] == 1.0);
    CHECK(f[16] == 1.0 - 0.0);     // t = 4, first sample of the fall
    CHECK(f[18] == doctest::Approx(0.5));
    CHECK(f[20] == 0.0);
}

TEST_CASE("synth_square: zero amplitude and degenerate ramp")
{
    const Waveform z = synth_square({0.0, 1.0, 3.0, 1.0, 1.0}, 1.0);
    CHECK(z.samples.isZero(0.0));

    const Waveform s = synth_square({1.0, 0.0, 2.0, 1.0, 1.0}, 0.5);
    int plateau = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        CHECK((s[i] == 0.0 || s[i] == 1.0));
        plateau += s[i] == 1.0;
    }
    CHECK(plateau == 4);
}

TEST_CASE("synth_square: plateau is exactly the amplitude")
{
    const double amp = 0.1 + 0.2; // not representable as a short decimal
    const Waveform w = synth_square({amp, 0.7, 2.9, 0.3, 0.4}, 0.1);
    int n = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double t = w.time(i);
        if (t >= 1.0 + 1e-9 && t < 3.9 - 1e-9) {
            CHECK(w[i] == amp);
            ++n;
        }
    }
    CHECK(n > 20);
}

TEST_CASE("synth_square preconditions")
{
    CHECK_THROWS_AS(synth_square({1.0, 0.0, 0.0, 0.0, 0.0}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(synth_square({1.0, 0.0, 1.0, 0.0, 0.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(synth_square({1.0, -1.0, 1.0, 0.0, 0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("apply_channel: unit delta kernel is the identity")
{
    const Waveform x(Eigen::VectorXd::Random(17), 1.0);
    const auto c = DistortionChannel::impulse(Waveform(Eigen::VectorXd::Unit(1, 0), 1.0));
    const Waveform y = apply_channel(c, x);
    CHECK(y.samples == x.samples);
}

TEST_CASE("apply_channel: one-pole step response matches 1 - a^(n+1)")
{
    const auto c = DistortionChannel::one_pole(1.0);
    const Waveform y = apply_channel(c, Waveform(Eigen::VectorXd::Ones(30), 1.0));
    const double a = std::exp(-1.0);
    CHECK(a == doctest::Approx(0.36788).epsilon(1e-5));
    for (Eigen::Index n = 0; n < y.size(); ++n)
        CHECK(y[n] == doctest::Approx(1.0 - std::pow(a, static_cast<double>(n + 1))).epsilon(1e-14));
    const Eigen::VectorXd ref = one_pole_recursion(Eigen::VectorXd::Ones(30), 1.0, 1.0);
    CHECK((y.samples - ref).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("apply_channel: composing with a delta changes nothing")
{
    const Waveform x(Eigen::VectorXd::Random(25), 1.0);
    const auto pole = DistortionChannel::one_pole(1.0);
    const auto both = DistortionChannel::compose({pole, DistortionChannel::impulse(Waveform(Eigen::VectorXd::Ones(1), 1.0))});
    const Waveform a = apply_channel(pole, x);
    const Waveform b = apply_channel(both, x);
    REQUIRE(a.size() == b.size());
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);
    CHECK(apply_channel(DistortionChannel::identity(), x).samples == x.samples);
}

TEST_CASE("apply_channel: impulse output is the full convolution")
{
    const Waveform x((Eigen::VectorXd(3) << 1, 2, 3).finished(), 1.0);
    const auto c = DistortionChannel::impulse(Waveform((Eigen::VectorXd(2) << 1, -0.5).finished(), 1.0));
    const Waveform y = apply_channel(c, x);
    const Eigen::VectorXd expect = (Eigen::VectorXd(4) << 1, 1.5, 2, -1.5).finished();
    CHECK(y.samples == expect);
}

TEST_CASE("apply_channel: period mismatch is rejected unless resampling is enabled")
{
    const Waveform x(Eigen::VectorXd::Ones(20), 0.5);
    const auto c = DistortionChannel::impulse(Waveform((Eigen::VectorXd(3) << 0.5, 0.3, 0.2).finished(), 1.0));
    CHECK_THROWS_AS(apply_channel(c, x), std::invalid_argument);
    const Waveform y = apply_channel(c, x, {true});
    // DC gain is preserved: taps are rescaled by the period ratio.
    CHECK(y[10] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one-pole with vanishing tau acts as identity")
{
    const Waveform x(Eigen::VectorXd::Random(40), 1.0);
    const Waveform y = apply_channel(DistortionChannel::one_pole(1e-6), x);
    CHECK((y.samples - x.samples).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("step_response examples")
{
    const StepResponse id = step_response(DistortionChannel::identity(), 10.0, 1.0);
    CHECK(id.s.samples.isOnes(0.0));

    // Exponential hold: the discrete response sits on the continuous curve, shifted by one sample.
    const double T = 0.01;
    const StepResponse op = step_response(DistortionChannel::one_pole(1.0), 10.0, T);
    for (Eigen::Index n = 0; n < op.s.size(); n += 37) {
        const double t = op.s.time(n);
        CHECK(std::abs(op.s[n] - (1.0 - std::exp(-t))) <= T * 1.0 + 1e-12);
    }

    const StepResponse two =
        step_response(DistortionChannel::compose({DistortionChannel::one_pole(1.0), DistortionChannel::one_pole(1.0)}), 10.0, T);
    double worst = 0.0;
    for (Eigen::Index n = 0; n < two.s.size(); ++n) {
        const double t = two.s.time(n);
        worst = std::max(worst, std::abs(two.s[n] - (1.0 - (1.0 + t) * std::exp(-t))));
    }
    CHECK(worst < 3.0 * T);
}

TEST_CASE("step_response flags zero DC gain")
{
    const auto c = DistortionChannel::impulse(Waveform((Eigen::VectorXd(2) << 1, -1).finished(), 1.0));
    const StepResponse r = step_response(c, 5.0, 1.0);
    CHECK(r.degenerate);
    CHECK(r.s[0] == 1.0);
    CHECK(r.s[3] == 0.0);
}

TEST_CASE("impulse_from_step examples")
{
    const Waveform h = impulse_from_step(Waveform(Eigen::VectorXd::Ones(6), 0.5));
    CHECK(h[0] == 2.0);
    CHECK(h.samples.tail(5).isZero(0.0));

    const double T = 0.001;
    Eigen::VectorXd s(5001);
    for (Eigen::Index n = 0; n < s.size(); ++n)
        s[n] = 1.0 - std::exp(-static_cast<double>(n) * T);
    const Waveform d = impulse_from_step(Waveform(s, T));
    for (Eigen::Index n = 1; n < d.size(); n += 250) {
        const double t = static_cast<double>(n) * T;
        CHECK(d[n] == doctest::Approx(std::exp(-t)).epsilon(2.0 * T));
    }
    CHECK_THROWS_AS(impulse_from_step(Waveform(Eigen::VectorXd::Ones(1), 1.0)), std::invalid_argument);
}

TEST_CASE("resample and zero-order hold")
{
    const Waveform x((Eigen::VectorXd(3) << 0, 1, 4).finished(), 1.0, 2.0);
    const Waveform r = resample(x, 0.5);
    REQUIRE(r.size() == 5);
    CHECK(r[1] == 0.5);
    CHECK(r[3] == 2.5);
    CHECK(r.t0 == 2.0);
    const Waveform z = zoh_upsample(x, 3);
    REQUIRE(z.size() == 9);
    CHECK(z[5] == 1.0);
    CHECK(z.sample_period == doctest::Approx(1.0 / 3.0));
}
