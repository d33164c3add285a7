#include <doctest.h>

#include "cryo/filterdesign.hpp"

#include <cmath>

using namespace cryo;

namespace {

Waveform sampled_one_pole(double tau, double T, Eigen::Index n)
{
    // Dimensionless taps of y[n] = (1 - a) x[n] + a y[n-1]: h[n] = (1 - a) a^n.
    const double a = std::exp(-T / tau);
    Eigen::VectorXd h(n);
    for (Eigen::Index k = 0; k < n; ++k)
        h[k] = (1.0 - a) * std::pow(a, static_cast<double>(k));
    return {h, T};
}

} // namespace

TEST_CASE("build_conv_matrix layout")
{
    CHECK(build_conv_matrix(Waveform(Eigen::VectorXd::Ones(1), 1.0), 4) == Eigen::MatrixXd::Identity(4, 4));

    const Eigen::MatrixXd H = build_conv_matrix(Waveform((Eigen::VectorXd(2) << 1, -0.5).finished(), 1.0), 3);
    Eigen::MatrixXd expect(4, 3);
    expect << 1, 0, 0, -0.5, 1, 0, 0, -0.5, 1, 0, 0, -0.5;
    CHECK(H == expect);
    CHECK_THROWS_AS(build_conv_matrix(Waveform(Eigen::VectorXd::Ones(5), 1.0), 3), std::invalid_argument);
}

TEST_CASE("conv matrix product equals channel convolution")
{
    const Waveform h(Eigen::VectorXd::Random(6), 1.0);
    const Waveform x(Eigen::VectorXd::Random(15), 1.0);
    const Eigen::VectorXd y1 = build_conv_matrix(h, 15) * x.samples;
    const Waveform y2 = apply_channel(DistortionChannel::impulse(h), x);
    REQUIRE(y2.size() == y1.size());
    CHECK((y1 - y2.samples).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("invert_to_fir examples")
{
    const Inversion d = invert_to_fir(Waveform(Eigen::VectorXd::Unit(5, 0), 1.0), 5);
    CHECK(d.fir.b == Eigen::VectorXd::Unit(5, 0));

    const Inversion half = invert_to_fir(Waveform((Eigen::VectorXd(2) << 0.5, 0.5).finished(), 1.0), 6);
    const Eigen::VectorXd alt = (Eigen::VectorXd(6) << 2, -2, 2, -2, 2, -2).finished();
    CHECK(half.fir.b == alt);

    const Waveform h = sampled_one_pole(1.0, 1.0, 60);
    const Inversion inv = invert_to_fir(h, 20);
    CHECK(inv.max_residual <= 1e-9);
    // Beyond the truncation horizon the residual is bounded by a^fir_len.
    const double a = std::exp(-1.0);
    CHECK(inv.residual.tail(inv.residual.size() - 20).cwiseAbs().maxCoeff() <= std::pow(a, 20) + 1e-15);
    // The exact inverse of the one-pole is the two-tap filter [1/(1-a), -a/(1-a)].
    CHECK(inv.fir.b[0] == doctest::Approx(1.0 / (1.0 - a)).epsilon(1e-12));
    CHECK(inv.fir.b[1] == doctest::Approx(-a / (1.0 - a)).epsilon(1e-12));
    CHECK(inv.fir.b.tail(18).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("invert_to_fir rejects a vanishing leading tap")
{
    const Waveform h((Eigen::VectorXd(3) << 1e-12, 1.0, 0.5).finished(), 1.0);
    CHECK_THROWS_AS(invert_to_fir(h, 5), NonInvertibleError);
    CHECK_THROWS_AS(invert_to_fir(Waveform(Eigen::VectorXd::Ones(2), 1.0), 0), std::invalid_argument);
}

TEST_CASE("noise floor clamps trailing taps")
{
    Waveform h = sampled_one_pole(1.0, 1.0, 30);
    h.samples.tail(10).array() += 1e-6;
    InvertOptions opt;
    opt.noise_floor = 1e-3;
    const Inversion inv = invert_to_fir(h, 20, opt);
    Eigen::VectorXd clamped = h.samples;
    const double floor = 1e-3 * clamped.cwiseAbs().maxCoeff();
    for (Eigen::Index k = clamped.size() - 1; k > 0 && std::abs(clamped[k]) < floor; --k)
        clamped[k] = 0.0;
    CHECK(clamped.tail(10).isZero(0.0));
    CHECK(inv.fir.b == causal_inverse(clamped, 20));
    CHECK(invert_to_fir(h, 20).fir.b != inv.fir.b);
}

TEST_CASE("least-squares inversion with zero weight approaches the exact inverse")
{
    const Waveform h = sampled_one_pole(2.0, 1.0, 40);
    InvertOptions ls;
    ls.method = InvertOptions::Method::least_squares;
    const Inversion a = invert_to_fir(h, 20);
    const Inversion b = invert_to_fir(h, 20, ls);
    CHECK((a.fir.b - b.fir.b).cwiseAbs().maxCoeff() < 1e-2);
    ls.lambda = 1.0;
    const Inversion c = invert_to_fir(h, 20, ls);
    CHECK(c.fir.b.norm() < b.fir.b.norm());
}

TEST_CASE("adjust_overshoot examples")
{
    FIRCoefficients c;
    c.b = Eigen::VectorXd::LinSpaced(6, 1.0, 0.5);
    const FIRCoefficients first = adjust_overshoot(c, {{0, -0.2}, {1, 0.2}});
    CHECK(first.b[0] == c.b[0] - 0.2);
    CHECK(first.b[1] == c.b[1] + 0.2);
    CHECK(first.b.tail(4) == c.b.tail(4));
    const FIRCoefficients second = adjust_overshoot(first, {{2, -0.02}, {4, 0.02}});
    CHECK(second.b[2] == c.b[2] - 0.02);
    CHECK(second.b[4] == c.b[4] + 0.02);
    REQUIRE(second.adjustments.size() == 4);
    CHECK(second.adjustments[3] == std::pair<int, double>{4, 0.02});
    CHECK(adjust_overshoot(c, {}).b == c.b);
    CHECK_THROWS_AS(adjust_overshoot(c, {{6, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(adjust_overshoot(c, {{-1, 0.1}}), std::invalid_argument);
}

TEST_CASE("apply_predistortion examples")
{
    const Waveform x(Eigen::VectorXd::Random(40), 1.0);
    for (double w : {1.0, 5.0, 20.0, double(INFINITY)})
        CHECK(apply_predistortion(x, FIRCoefficients::delta(), w).samples == x.samples);

    const Inversion inv = invert_to_fir(sampled_one_pole(1.0, 1.0, 40), 4);
    const Waveform y = apply_predistortion(x, inv.fir, 5.0);
    CHECK(y.samples.head(5) != x.samples.head(5));
    CHECK(y[5] == doctest::Approx(0.5 * (x[5] + (inv.fir.b[0] * x[5] + inv.fir.b[1] * x[4]))));
    CHECK(y.samples.tail(34) == x.samples.tail(34));

    CHECK_THROWS_AS(apply_predistortion(x, inv.fir, 3.0), std::invalid_argument);
    CHECK_THROWS_AS(apply_predistortion(Waveform(Eigen::VectorXd::Ones(4), 0.5), inv.fir, 10.0),
                    std::invalid_argument);
}

TEST_CASE("square pulse through inverse and one-pole channel comes out flat")
{
    const auto channel = DistortionChannel::one_pole(1.0);
    const Inversion inv = invert_to_fir(sampled_one_pole(1.0, 1.0, 40), 20);
    const Waveform pulse = synth_square({1.0, 0.0, 30.0, 0.0, 0.0}, 1.0);
    const Waveform out = apply_channel(channel, apply_predistortion(pulse, inv.fir, INFINITY));
    for (Eigen::Index n = 1; n < 30; ++n)
        CHECK(std::abs(out[n] - 1.0) <= 0.01);
}

TEST_CASE("verify_loop examples")
{
    const auto channel = DistortionChannel::one_pole(1.0);
    const Inversion inv = invert_to_fir(sampled_one_pole(1.0, 1.0, 40), 20);
    const LoopReport good = verify_loop(channel, inv.fir);
    CHECK(good.settling_time <= 1.0);
    CHECK(good.max_plateau_ripple < 1e-9);

    // Uncorrected: |y - 1| = a^(n+1) <= 0.01 first at n + 1 >= ln 100, i.e. settled from 4 ns.
    const LoopReport raw = verify_loop(channel, FIRCoefficients::delta());
    CHECK(raw.settling_time == doctest::Approx(4.0));
    CHECK(raw.settling_time <= std::log(100.0));
    CHECK(raw.overshoot_n0 == doctest::Approx(-std::exp(-1.0)).epsilon(1e-12));

    const LoopReport id = verify_loop(DistortionChannel::identity(), FIRCoefficients::delta());
    CHECK(id.max_plateau_ripple == 0.0);
    CHECK(id.settling_time == 0.0);
    CHECK(id.overshoot_n0 == 0.0);
}

TEST_CASE("fir json round-trips bit-exactly")
{
    FIRCoefficients c;
    c.b = Eigen::VectorXd::Random(20);
    c.sample_period = 0.1;
    c = adjust_overshoot(c, {{0, -0.2}, {1, 0.2}});
    const FIRCoefficients r = parse_fir_json(fir_json(c));
    CHECK(r.b == c.b);
    CHECK(r.sample_period == c.sample_period);
    CHECK(r.adjustments == c.adjustments);
    CHECK_THROWS(parse_fir_json(R"({"sample_period":1,"b":[1],"gain":2})"));
}
