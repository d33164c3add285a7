#include "cryo/chirp.hpp"

#include "cryo/lsq.hpp"
#include "cryo/units.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>

namespace cryo {

void ChirpSignalParams::validate() const
{
    if (!(t0 > 0.0))
        throw std::invalid_argument("ChirpSignalParams: t0 must be > 0");
}

ChirpSignalParams ChirpSignalParams::table_chirped()
{
    return {0.1044, 0.0610, 65.1, 40.7, 22.599, 0.5, 35.394};
}

ChirpSignalParams ChirpSignalParams::table_unchirped()
{
    auto p = table_chirped();
    p.C = 0.0;
    return p;
}

Waveform synth_exchange_signal(const ChirpSignalParams& p, const Eigen::VectorXd& tgrid)
{
    p.validate();
    if (tgrid.size() < 1)
        throw std::invalid_argument("synth_exchange_signal: empty time grid");
    double period = 1.0;
    if (tgrid.size() > 1) {
        period = (tgrid[tgrid.size() - 1] - tgrid[0]) / static_cast<double>(tgrid.size() - 1);
        for (Eigen::Index i = 1; i < tgrid.size(); ++i)
            if (std::abs(tgrid[i] - tgrid[i - 1] - period) > 1e-9 * std::abs(period))
                throw std::invalid_argument("synth_exchange_signal: time grid must be uniform");
    }
    Eigen::VectorXd s(tgrid.size());
    for (Eigen::Index i = 0; i < tgrid.size(); ++i) {
        const double t = tgrid[i];
        // MHz * ns = 1e-3 cycles
        const double ph1 = two_pi * (p.B1 * 1e-3 * t + p.C * p.C * 1e-6 * t * t);
        const double ph2 = two_pi * p.B2 * 1e-3 * t;
        s[i] = (p.A1 * std::sin(ph1) + p.A2 * std::sin(ph2)) * std::exp(-t * t / (p.t0 * p.t0)) + p.D;
    }
    return {std::move(s), period, tgrid[0]};
}

Waveform synth_exchange_signal(const ChirpSignalParams& p, double duration, double sample_period)
{
    if (!(duration > 0.0) || !(sample_period > 0.0))
        throw std::invalid_argument("synth_exchange_signal: duration and sample_period must be > 0");
    const auto n = static_cast<Eigen::Index>(std::floor(duration / sample_period + 1e-9)) + 1;
    return synth_exchange_signal(p, Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1) * sample_period));
}

namespace {

Eigen::VectorXd fft_magnitude(const Eigen::VectorXd& x, int nfft)
{
    std::vector<double> in(static_cast<size_t>(nfft), 0.0);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        in[static_cast<size_t>(i)] = x[i];
    std::vector<std::complex<double>> out;
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    Eigen::VectorXd mag(nfft / 2 + 1);
    for (Eigen::Index k = 0; k < mag.size(); ++k)
        mag[k] = std::abs(out[static_cast<size_t>(k)]);
    return mag;
}

WindowFit fit_window(const Eigen::VectorXd& t, const Eigen::VectorXd& x, double period, double t_start)
{
    WindowFit w;
    w.t_start = t_start;
    const double mean = x.mean();
    const double ptp = x.maxCoeff() - x.minCoeff();
    if (!(ptp > 1e-12 * std::max(1.0, std::abs(mean)))) {
        w.note = "no oscillation";
        return w;
    }
    const int nfft = 16 * static_cast<int>(x.size());
    const Eigen::VectorXd mag = fft_magnitude((x.array() - mean).matrix(), nfft);
    Eigen::Index k;
    mag.tail(mag.size() - 1).maxCoeff(&k);
    const double omega0 = two_pi * static_cast<double>(k + 1) / (nfft * period);

    auto residual = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return (p[0] * (p[1] * (t.array() - p[2])).cos() + p[3]).matrix() - x;
    };
    // A converged fit that leaves the FFT peak's resolution bin sits in a side
    // basin of the phase; restart, then keep the best converged candidate.
    const double bin = two_pi / (static_cast<double>(x.size()) * period);
    // uniform samples cannot tell omega from its aliases: fold into [0, Nyquist]
    const double fs = two_pi / period;
    auto fold = [fs](double om) {
        om = std::fmod(std::abs(om), fs);
        return om > 0.5 * fs ? fs - om : om;
    };
    std::mt19937_64 rng(static_cast<std::uint64_t>(std::llround(t_start * 1000.0)));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::optional<LsqResult<double>> best;
    for (int attempt = 0; attempt <= 5; ++attempt) {
        Eigen::VectorXd p0(4);
        p0 << 0.5 * ptp, omega0, t_start, mean;
        if (attempt > 0) {
            p0[1] *= 1.0 + 0.1 * u(rng);
            p0[2] += u(rng) * std::numbers::pi / omega0;
        }
        const auto r = levenberg_marquardt<double>(residual, p0);
        const double se = r.stderr_of(1);
        if (!(r.converged && r.params.allFinite() && std::isfinite(se) && std::abs(r.params[0]) > 1e-9 * ptp
              && std::abs(r.params[1]) > 0.0))
            continue;
        if (!best || r.rss < best->rss)
            best = r;
        if (std::abs(fold(r.params[1]) - omega0) <= bin)
            break;
    }
    if (best) {
        w.omega = fold(best->params[1]);
        w.stderr_ = best->stderr_of(1);
        w.valid = true;
        return w;
    }
    w.note = "no convergence";
    return w;
}

} // namespace

std::vector<WindowFit> sliding_window_fit(const Waveform& trace, double window_T, double step)
{
    validate(trace);
    if (!(window_T > 0.0) || !(step > 0.0))
        throw std::invalid_argument("sliding_window_fit: window and step must be > 0");
    const double dur = trace.end_time() - trace.t0;
    if (dur < window_T + step - 1e-9 * trace.sample_period)
        throw std::invalid_argument("sliding_window_fit: trace shorter than window + step");
    const double tol = 1e-9 * trace.sample_period;
    std::vector<WindowFit> out;
    for (long n = 0;; ++n) {
        const double ts = trace.t0 + static_cast<double>(n) * step;
        if (ts + window_T > trace.end_time() + tol)
            break;
        const auto i0 = static_cast<Eigen::Index>(std::ceil((ts - trace.t0 - tol) / trace.sample_period));
        const auto i1 = static_cast<Eigen::Index>(std::floor((ts + window_T - trace.t0 + tol) / trace.sample_period));
        const Eigen::Index m = std::min(i1, trace.size() - 1) - i0 + 1;
        if (m < 6)
            throw std::invalid_argument("sliding_window_fit: fewer than 6 samples per window");
        const Eigen::VectorXd t = trace.times().segment(i0, m);
        out.push_back(fit_window(t, trace.samples.segment(i0, m), trace.sample_period, ts));
    }
    return out;
}

double sliding_fit_slope_mhz_per_ns(const std::vector<WindowFit>& fits, double window_T)
{
    // inverse-variance weights, scaled by the smallest stderr to stay in range
    double se_min = std::numeric_limits<double>::infinity();
    for (const auto& f : fits)
        if (f.valid && std::isfinite(f.stderr_))
            se_min = std::min(se_min, std::max(f.stderr_, 1e-12 * f.omega));
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& f : fits) {
        if (!f.valid || !std::isfinite(f.stderr_))
            continue;
        const double r = se_min / std::max({f.stderr_, se_min, 1e-300});
        const double w = se_min > 0.0 ? r * r : 1.0;
        const double x = f.t_start + 0.5 * window_T;
        const double y = f.omega / two_pi * 1e3;
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        ++n;
    }
    if (n < 2)
        throw std::invalid_argument("sliding_fit_slope: fewer than two valid windows");
    return (sw * sxy - sx * sy) / (sw * sxx - sx * sx);
}

std::string to_string(WindowFn w)
{
    switch (w) {
    case WindowFn::hann:
        return "hann";
    case WindowFn::rect:
        return "rect";
    case WindowFn::gauss:
        return "gauss";
    }
    return "?";
}

WindowFn window_fn_from_string(const std::string& s)
{
    if (s == "hann")
        return WindowFn::hann;
    if (s == "rect")
        return WindowFn::rect;
    if (s == "gauss")
        return WindowFn::gauss;
    throw std::invalid_argument("unknown window function '" + s + "' (expected hann, rect or gauss)");
}

Eigen::VectorXd window_samples(WindowFn w, Eigen::Index n)
{
    Eigen::VectorXd v(n);
    const double c = 0.5 * static_cast<double>(n - 1);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k);
        switch (w) {
        case WindowFn::hann:
            v[k] = n == 1 ? 1.0 : 0.5 - 0.5 * std::cos(two_pi * kk / static_cast<double>(n - 1));
            break;
        case WindowFn::rect:
            v[k] = 1.0;
            break;
        case WindowFn::gauss: {
            // sigma = n / 6
            const double z = (kk - c) / (static_cast<double>(n) / 6.0);
            v[k] = std::exp(-0.5 * z * z);
            break;
        }
        }
    }
    return v;
}

Spectrogram stft(const Waveform& trace, double window_len, double hop, WindowFn fn, const StftOptions& opt)
{
    validate(trace);
    if (!(hop > 0.0))
        throw std::invalid_argument("stft: hop must be > 0");
    if (opt.pad < 1)
        throw std::invalid_argument("stft: pad must be >= 1");
    const auto n = static_cast<Eigen::Index>(std::llround(window_len / trace.sample_period));
    if (n < 2 || n > trace.size())
        throw std::invalid_argument("stft: window must span 2 .. len(trace) samples");
    const int h = std::max(1, static_cast<int>(std::llround(hop / trace.sample_period)));
    const int nfft = static_cast<int>(n) * opt.pad;
    const Eigen::VectorXd win = window_samples(fn, n);
    const Eigen::Index frames = (trace.size() - n) / h + 1;

    Spectrogram s;
    s.window = fn;
    s.window_len = window_len;
    s.hop = hop;
    s.hop_samples = h;
    s.nfft = nfft;
    s.window_energy = win.squaredNorm();
    s.options = opt;
    s.freqs = Eigen::VectorXd::LinSpaced(nfft / 2 + 1, 0.0, static_cast<double>(nfft / 2))
        / (nfft * trace.sample_period) * 1e3;
    s.times.resize(frames);
    s.magnitude.resize(nfft / 2 + 1, frames);
    for (Eigen::Index f = 0; f < frames; ++f) {
        const Eigen::Index start = f * h;
        Eigen::VectorXd seg = trace.samples.segment(start, n);
        if (opt.detrend_frames)
            seg.array() -= seg.mean();
        Eigen::VectorXd mag = fft_magnitude(seg.cwiseProduct(win), nfft);
        if (opt.normalize_frames && mag.maxCoeff() > 0.0)
            mag /= mag.maxCoeff();
        s.magnitude.col(f) = mag;
        s.times[f] = trace.t0 + (static_cast<double>(start) + 0.5 * static_cast<double>(n - 1)) * trace.sample_period;
    }
    return s;
}

double spectrogram_energy(const Spectrogram& s)
{
    double e = 0.0;
    const Eigen::Index last = s.magnitude.rows() - 1;
    for (Eigen::Index k = 0; k <= last; ++k) {
        const bool single = k == 0 || (k == last && s.nfft % 2 == 0);
        e += (single ? 1.0 : 2.0) * s.magnitude.row(k).squaredNorm();
    }
    return e * s.hop_samples / (s.nfft * s.window_energy);
}

namespace {

double bilinear(const Eigen::MatrixXd& img, double x, double y)
{
    const double xmax = static_cast<double>(img.cols() - 1), ymax = static_cast<double>(img.rows() - 1);
    constexpr double slack = 1e-9;
    if (x < -slack || y < -slack || x > xmax + slack || y > ymax + slack)
        return 0.0;
    x = std::clamp(x, 0.0, xmax);
    y = std::clamp(y, 0.0, ymax);
    auto j = static_cast<Eigen::Index>(std::floor(x));
    auto i = static_cast<Eigen::Index>(std::floor(y));
    j = std::min<Eigen::Index>(j, img.cols() - 2);
    i = std::min<Eigen::Index>(i, img.rows() - 2);
    const double fx = x - static_cast<double>(j), fy = y - static_cast<double>(i);
    return (1 - fy) * ((1 - fx) * img(i, j) + fx * img(i, j + 1)) + fy * ((1 - fx) * img(i + 1, j) + fx * img(i + 1, j + 1));
}

} // namespace

RadonMap radon_image(const Eigen::MatrixXd& image, const Eigen::VectorXd& angles_deg)
{
    if (image.rows() < 2 || image.cols() < 2)
        throw std::invalid_argument("radon: image must be at least 2 x 2");
    if (image.rows() != image.cols())
        throw std::invalid_argument("radon: image must be square");
    if (angles_deg.size() == 0)
        throw std::invalid_argument("radon: no angles");
    const Eigen::Index N = image.rows();
    const double c = 0.5 * static_cast<double>(N - 1);
    const double shift = std::floor(c) - c; // puts theta = 0 and 90 samples on pixel centres
    const auto K = static_cast<Eigen::Index>(std::ceil(static_cast<double>(N) / std::numbers::sqrt2)) + 1;
    const Eigen::Index M = 2 * K + 1;

    RadonMap r;
    r.angles = angles_deg;
    r.offsets.resize(M);
    for (Eigen::Index k = 0; k < M; ++k)
        r.offsets[k] = static_cast<double>(k - K) + shift;
    r.response.resize(angles_deg.size(), M);
    for (Eigen::Index a = 0; a < angles_deg.size(); ++a) {
        const double th = angles_deg[a] * std::numbers::pi / 180.0;
        const double ct = std::cos(th), st = std::sin(th);
        for (Eigen::Index k = 0; k < M; ++k) {
            const double p = r.offsets[k];
            double sum = 0.0;
            for (Eigen::Index m = 0; m < M; ++m) {
                const double s = r.offsets[m];
                sum += bilinear(image, c + p * ct + s * st, c - p * st + s * ct);
            }
            r.response(a, k) = sum;
        }
    }
    r.normalization = "none";
    return r;
}

RadonMap radon(const Spectrogram& spec, const Eigen::VectorXd& angles_deg)
{
    const Eigen::MatrixXd& img = spec.magnitude;
    if (img.size() == 0)
        throw std::invalid_argument("radon: empty spectrogram");
    const Eigen::Index nf = img.rows(), nt = img.cols();
    const Eigen::Index N = std::max<Eigen::Index>(2, std::max(nf, nt));
    Eigen::MatrixXd sq(N, N);
    for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            const double y = nf > 1 ? static_cast<double>(i) * (nf - 1) / (N - 1) : 0.0;
            const double x = nt > 1 ? static_cast<double>(j) * (nt - 1) / (N - 1) : 0.0;
            if (nf > 1 && nt > 1)
                sq(i, j) = bilinear(img, x, y);
            else
                sq(i, j) = img(nf > 1 ? static_cast<Eigen::Index>(std::lround(y)) : 0,
                               nt > 1 ? static_cast<Eigen::Index>(std::lround(x)) : 0);
        }
    RadonMap r = radon_image(sq, angles_deg);
    r.normalization = "time and frequency axes min-max scaled to [0,1] on a " + std::to_string(N) + "x"
        + std::to_string(N) + " grid";
    return r;
}

double radon_peak_angle(const RadonMap& map)
{
    if (map.response.size() == 0)
        throw std::invalid_argument("radon_peak_angle: empty map");
    double best = map.response.row(0).maxCoeff();
    double angle = map.angles[0];
    for (Eigen::Index a = 1; a < map.response.rows(); ++a) {
        const double v = map.response.row(a).maxCoeff();
        const double tie = 1e-12 * std::max(std::abs(best), std::abs(v));
        if (v > best + tie || (std::abs(v - best) <= tie && std::abs(map.angles[a] - 90.0) < std::abs(angle - 90.0))) {
            best = std::max(best, v);
            angle = map.angles[a];
        }
    }
    return angle;
}

ChirpAnalysis analyze_chirp(const Waveform& trace, const ChirpAnalysisOptions& opt)
{
    if (!(opt.angle_step > 0.0))
        throw std::invalid_argument("analyze_chirp: angle_step must be > 0");
    ChirpAnalysis out;
    Waveform x = trace;
    if (opt.remove_mean)
        x.samples.array() -= x.samples.mean();
    out.spectrogram = stft(x, opt.window_len, opt.hop, opt.window, opt.stft);
    const auto na = static_cast<Eigen::Index>(std::ceil(180.0 / opt.angle_step - 1e-9));
    const Eigen::VectorXd angles = Eigen::VectorXd::LinSpaced(na, 0.0, static_cast<double>(na - 1) * opt.angle_step);
    out.radon = radon(out.spectrogram, angles);
    out.peak_angle = radon_peak_angle(out.radon);
    out.fits = sliding_window_fit(trace, opt.fit_window, opt.fit_step);
    out.slope_mhz_per_ns = sliding_fit_slope_mhz_per_ns(out.fits, opt.fit_window);
    return out;
}

} // namespace cryo
