#pragma once

#include <Eigen/Dense>

#include <vector>

namespace cryo {

/// Uniformly sampled real signal. Sample n sits at t0 + n * sample_period (ns).
struct Waveform {
    Eigen::VectorXd samples;
    double sample_period = 1.0;
    double t0 = 0.0;

    Waveform() = default;
    /// Throws std::invalid_argument unless period > 0, samples non-empty and finite.
    Waveform(Eigen::VectorXd s, double period, double start = 0.0);

    Eigen::Index size() const { return samples.size(); }
    double time(Eigen::Index n) const { return t0 + static_cast<double>(n) * sample_period; }
    double end_time() const { return time(size() - 1); }
    double operator[](Eigen::Index n) const { return samples[n]; }
    Eigen::VectorXd times() const;
};

void validate(const Waveform& x);

struct PulseSpec {
    double amplitude = 1.0;
    double ramp_time = 0.0;
    double plateau_time = 1.0;
    double pre_pad = 0.0;
    double post_pad = 0.0;
};

/// Trapezoid: zero on [0, pre), linear rise over ramp_time, flat for plateau_time,
/// linear fall over ramp_time, then zero. Intervals are half-open in time.
Waveform synth_square(const PulseSpec& spec, double sample_period);

struct DistortionChannel {
    enum class Kind { one_pole, impulse, composition };

    Kind kind = Kind::composition;
    double tau = 0.0;      // one_pole, ns
    Waveform h;            // impulse: dimensionless taps on h.sample_period
    std::vector<DistortionChannel> stages;

    static DistortionChannel identity() { return {}; }
    static DistortionChannel one_pole(double tau_ns);
    static DistortionChannel impulse(Waveform taps);
    static DistortionChannel compose(std::vector<DistortionChannel> stages);

    /// Sum of the impulse response (1 for one-pole, product over stages).
    double dc_gain() const;
};

struct ChannelOptions {
    /// Linearly interpolate an impulse kernel onto the input grid instead of rejecting.
    bool resample = false;
};

/// One-pole stages keep the input length; impulse stages return the full
/// convolution (len(x) + len(h) - 1).
Waveform apply_channel(const DistortionChannel& c, const Waveform& x, ChannelOptions opt = {});

struct StepResponse {
    Waveform s;
    double dc_gain = 1.0;
    bool degenerate = false; // zero DC gain: left unnormalized
};

/// Response to a unit step on [0, duration], divided by the DC gain.
StepResponse step_response(const DistortionChannel& c, double duration, double sample_period,
                           ChannelOptions opt = {});

/// h[0] = s[0]/T, h[n] = (s[n] - s[n-1])/T.
Waveform impulse_from_step(const Waveform& s);

/// Linear interpolation onto a new period over the same time span.
Waveform resample(const Waveform& x, double new_period);

/// Each sample held for `factor` samples of period T/factor.
Waveform zoh_upsample(const Waveform& x, int factor);

/// Full discrete convolution, length len(a) + len(b) - 1.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1>
convolve(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    using Scalar = typename DerivedA::Scalar;
    const Eigen::Index na = a.size();
    const Eigen::Index nb = b.size();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> y =
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(na + nb - 1);
    for (Eigen::Index i = 0; i < na; ++i)
        y.segment(i, nb) += a(i) * b;
    return y;
}

} // namespace cryo
