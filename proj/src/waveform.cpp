#include "cryo/waveform.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cryo {

namespace {

bool same_period(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

Waveform one_pole(double tau, const Waveform& x)
{
    if (!(tau > 0.0))
        throw std::invalid_argument("one-pole channel: tau must be > 0");
    const double a = std::exp(-x.sample_period / tau);
    Eigen::VectorXd y(x.size());
    double prev = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        prev = (1.0 - a) * x[n] + a * prev;
        y[n] = prev;
    }
    return {std::move(y), x.sample_period, x.t0};
}

} // namespace

Waveform::Waveform(Eigen::VectorXd s, double period, double start)
    : samples(std::move(s)), sample_period(period), t0(start)
{
    validate(*this);
}

Eigen::VectorXd Waveform::times() const
{
    return Eigen::VectorXd::LinSpaced(size(), 0.0, static_cast<double>(size() - 1)) * sample_period
        + Eigen::VectorXd::Constant(size(), t0);
}

void validate(const Waveform& x)
{
    if (!(x.sample_period > 0.0) || !std::isfinite(x.sample_period))
        throw std::invalid_argument("waveform: sample_period must be positive");
    if (x.samples.size() == 0)
        throw std::invalid_argument("waveform: no samples");
    if (!x.samples.allFinite())
        throw std::invalid_argument("waveform: non-finite sample");
    if (!std::isfinite(x.t0))
        throw std::invalid_argument("waveform: non-finite t0");
}

Waveform synth_square(const PulseSpec& spec, double sample_period)
{
    if (!(sample_period > 0.0))
        throw std::invalid_argument("synth_square: sample_period must be > 0");
    if (!(spec.plateau_time > 0.0))
        throw std::invalid_argument("synth_square: plateau_time must be > 0");
    if (spec.ramp_time < 0.0 || spec.pre_pad < 0.0 || spec.post_pad < 0.0)
        throw std::invalid_argument("synth_square: ramp and padding must be >= 0");
    if (!std::isfinite(spec.amplitude))
        throw std::invalid_argument("synth_square: non-finite amplitude");

    const double r = spec.ramp_time;
    const double up_end = spec.pre_pad + r;
    const double flat_end = up_end + spec.plateau_time;
    const double down_end = flat_end + r;
    const double total = down_end + spec.post_pad;
    const auto n = static_cast<Eigen::Index>(std::llround(total / sample_period)) + 1;
    // comparisons are done in sample units so that grid points land on edges exactly
    const double eps = 1e-9;
    auto before = [&](double t, double edge) { return t / sample_period < edge / sample_period - eps; };

    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) * sample_period;
        double v = 0.0;
        if (before(t, spec.pre_pad))
            v = 0.0;
        else if (before(t, up_end))
            v = spec.amplitude * (t - spec.pre_pad) / r;
        else if (before(t, flat_end))
            v = spec.amplitude;
        else if (before(t, down_end))
            v = spec.amplitude * (down_end - t) / r;
        s[i] = v;
    }
    return {std::move(s), sample_period, 0.0};
}

DistortionChannel DistortionChannel::one_pole(double tau_ns)
{
    if (!(tau_ns > 0.0))
        throw std::invalid_argument("one-pole channel: tau must be > 0");
    DistortionChannel c;
    c.kind = Kind::one_pole;
    c.tau = tau_ns;
    return c;
}

DistortionChannel DistortionChannel::impulse(Waveform taps)
{
    validate(taps);
    DistortionChannel c;
    c.kind = Kind::impulse;
    c.h = std::move(taps);
    return c;
}

DistortionChannel DistortionChannel::compose(std::vector<DistortionChannel> stages)
{
    DistortionChannel c;
    c.kind = Kind::composition;
    c.stages = std::move(stages);
    return c;
}

double DistortionChannel::dc_gain() const
{
    switch (kind) {
    case Kind::one_pole:
        return 1.0;
    case Kind::impulse:
        return h.samples.sum();
    case Kind::composition: {
        double g = 1.0;
        for (const auto& s : stages)
            g *= s.dc_gain();
        return g;
    }
    }
    return 1.0;
}

Waveform apply_channel(const DistortionChannel& c, const Waveform& x, ChannelOptions opt)
{
    validate(x);
    switch (c.kind) {
    case DistortionChannel::Kind::one_pole:
        return one_pole(c.tau, x);
    case DistortionChannel::Kind::impulse: {
        Eigen::VectorXd taps = c.h.samples;
        if (!same_period(c.h.sample_period, x.sample_period)) {
            if (!opt.resample)
                throw std::invalid_argument("apply_channel: kernel period "
                                            + std::to_string(c.h.sample_period) + " ns differs from input period "
                                            + std::to_string(x.sample_period) + " ns");
            // taps are a sampled density times the period; keep the DC gain
            taps = resample(c.h, x.sample_period).samples;
            const double gain = c.h.samples.sum(), sum = taps.sum();
            taps *= std::abs(sum) > 1e-12 * c.h.samples.cwiseAbs().sum() ? gain / sum
                                                                          : x.sample_period / c.h.sample_period;
        }
        return {convolve(x.samples, taps), x.sample_period, x.t0};
    }
    case DistortionChannel::Kind::composition: {
        Waveform y = x;
        for (const auto& s : c.stages)
            y = apply_channel(s, y, opt);
        return y;
    }
    }
    return x;
}

StepResponse step_response(const DistortionChannel& c, double duration, double sample_period,
                           ChannelOptions opt)
{
    if (!(duration > 0.0))
        throw std::invalid_argument("step_response: duration must be > 0");
    if (!(sample_period > 0.0))
        throw std::invalid_argument("step_response: sample_period must be > 0");
    const auto n = static_cast<Eigen::Index>(std::llround(duration / sample_period)) + 1;
    Waveform u(Eigen::VectorXd::Ones(n), sample_period);
    Waveform y = apply_channel(c, u, opt);
    y.samples.conservativeResize(n);

    StepResponse r;
    r.dc_gain = c.dc_gain();
    r.degenerate = std::abs(r.dc_gain) < 1e-12;
    if (!r.degenerate)
        y.samples /= r.dc_gain;
    r.s = std::move(y);
    return r;
}

Waveform impulse_from_step(const Waveform& s)
{
    validate(s);
    if (s.size() < 2)
        throw std::invalid_argument("impulse_from_step: need at least 2 samples");
    Eigen::VectorXd h(s.size());
    h[0] = s[0];
    h.tail(s.size() - 1) = s.samples.tail(s.size() - 1) - s.samples.head(s.size() - 1);
    return {h / s.sample_period, s.sample_period, s.t0};
}

Waveform resample(const Waveform& x, double new_period)
{
    validate(x);
    if (!(new_period > 0.0))
        throw std::invalid_argument("resample: period must be > 0");
    const double span = x.end_time() - x.t0;
    const auto n = static_cast<Eigen::Index>(std::floor(span / new_period + 1e-9)) + 1;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pos = static_cast<double>(i) * new_period / x.sample_period;
        auto k = static_cast<Eigen::Index>(std::floor(pos));
        if (k >= x.size() - 1) {
            y[i] = x[x.size() - 1];
            continue;
        }
        const double f = pos - static_cast<double>(k);
        y[i] = (1.0 - f) * x[k] + f * x[k + 1];
    }
    return {std::move(y), new_period, x.t0};
}

Waveform zoh_upsample(const Waveform& x, int factor)
{
    validate(x);
    if (factor < 1)
        throw std::invalid_argument("zoh_upsample: factor must be >= 1");
    Eigen::VectorXd y(x.size() * factor);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        y.segment(i * factor, factor).setConstant(x[i]);
    return {std::move(y), x.sample_period / factor, x.t0};
}

} // namespace cryo
