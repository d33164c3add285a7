#include "cryo/daps.hpp"

#include "cryo/lsq.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace cryo {

std::string to_string(DapsMode m)
{
    switch (m) {
    case DapsMode::ode:
        return "ode";
    case DapsMode::integral:
        return "integral";
    case DapsMode::delta:
        return "delta";
    }
    return "?";
}

DapsMode daps_mode_from_string(const std::string& s)
{
    if (s == "ode")
        return DapsMode::ode;
    if (s == "integral")
        return DapsMode::integral;
    if (s == "delta")
        return DapsMode::delta;
    throw std::invalid_argument("unknown DAPS mode '" + s + "' (expected ode, integral or delta)");
}

void DAPSMap::validate() const
{
    auto increasing = [](const Eigen::VectorXd& g) {
        for (Eigen::Index i = 1; i < g.size(); ++i)
            if (!(g[i] > g[i - 1]))
                return false;
        return g.size() > 0;
    };
    if (!increasing(amplitudes) || !increasing(times))
        throw std::invalid_argument("DAPSMap: grids must be non-empty and strictly increasing");
    if (signal.rows() != times.size() || signal.cols() != amplitudes.size())
        throw std::invalid_argument("DAPSMap: signal shape does not match the grids");
    if (!signal.allFinite() || signal.minCoeff() < -0.05 || signal.maxCoeff() > 1.05)
        throw std::invalid_argument("DAPSMap: signal outside [-0.05, 1.05]");
}

namespace {

int hold_factor(const PulseConfig& pulse)
{
    if (!(pulse.sim_period > 0.0) || !(pulse.awg_period > 0.0))
        throw std::invalid_argument("pulse: sample periods must be > 0");
    const double r = pulse.awg_period / pulse.sim_period;
    const long f = std::lround(r);
    if (f < 1 || std::abs(r - static_cast<double>(f)) > 1e-9 * r)
        throw std::invalid_argument("pulse: awg_period must be an integer multiple of sim_period");
    return static_cast<int>(f);
}

Waveform program_and_distort(const DistortionChannel& c, const PulseConfig& pulse, const PulseSpec& spec)
{
    const int f = hold_factor(pulse);
    const Waveform x = zoh_upsample(synth_square(spec, pulse.awg_period), f);
    Waveform y = apply_channel(c, x);
    y.samples.conservativeResize(x.size());
    return y;
}

std::mt19937_64 cell_rng(std::uint64_t seed, Eigen::Index row, Eigen::Index col)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(row), static_cast<std::uint32_t>(col)};
    return std::mt19937_64(seq);
}

template <typename Body>
void parallel_rows(Eigen::Index rows, unsigned threads, Body body)
{
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows)));
    if (n == 1) {
        for (Eigen::Index r = 0; r < rows; ++r)
            body(r);
        return;
    }
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k)
        pool.emplace_back([&] {
            for (Eigen::Index r = next++; r < rows; r = next++) {
                try {
                    body(r);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(m);
                    if (!err)
                        err = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
}

std::string describe(const DistortionChannel& c)
{
    switch (c.kind) {
    case DistortionChannel::Kind::one_pole:
        return "one_pole(tau=" + std::to_string(c.tau) + " ns)";
    case DistortionChannel::Kind::impulse:
        return "impulse(" + std::to_string(c.h.size()) + " taps)";
    case DistortionChannel::Kind::composition: {
        if (c.stages.empty())
            return "identity";
        std::string s = "composition(";
        for (size_t i = 0; i < c.stages.size(); ++i)
            s += (i ? ", " : "") + describe(c.stages[i]);
        return s + ")";
    }
    }
    return "?";
}

} // namespace

Waveform distorted_pulse(const DistortionChannel& c, const PulseConfig& pulse, double plateau)
{
    return program_and_distort(c, pulse, {1.0, pulse.ramp_time, plateau, pulse.pre_pad, pulse.post_pad});
}

StepFunction distorted_step(const DistortionChannel& c, const PulseConfig& pulse, double horizon)
{
    const PulseSpec spec{1.0, pulse.ramp_time, horizon + pulse.awg_period, 0.0, 0.0};
    auto y = std::make_shared<const Eigen::VectorXd>(program_and_distort(c, pulse, spec).samples);
    const double dt = pulse.sim_period;
    return [y, dt](double tau) {
        if (tau <= 0.0)
            return 0.0;
        const double k = tau / dt - 1.0;
        if (k < 0.0)
            return (*y)[0] * (tau / dt);
        const auto i = static_cast<Eigen::Index>(std::floor(k));
        if (i >= y->size() - 1)
            return (*y)[y->size() - 1];
        const double f = k - static_cast<double>(i);
        return (1.0 - f) * (*y)[i] + f * (*y)[i + 1];
    };
}

double critical_amplitude(const DistortionChannel& c, const PulseConfig& pulse, double plateau,
                          const TwoLevelParams& p)
{
    const double peak = distorted_pulse(c, pulse, plateau).samples.maxCoeff();
    if (!(peak > 0.0))
        throw std::invalid_argument("critical_amplitude: distorted pulse never goes positive");
    return p.eps0 / peak;
}

DAPSMap run_daps_sweep(const DistortionChannel& c, const std::vector<WeightedParams>& params,
                       const Eigen::VectorXd& amp_grid, const Eigen::VectorXd& time_grid, const SweepOptions& opt)
{
    if (amp_grid.size() == 0 || time_grid.size() == 0)
        throw std::invalid_argument("run_daps_sweep: empty grid");
    if (params.empty())
        throw std::invalid_argument("run_daps_sweep: no two-level parameters");
    for (const auto& wp : params)
        wp.params.validate();
    if (opt.noise_sigma < 0.0)
        throw std::invalid_argument("run_daps_sweep: noise_sigma must be >= 0");

    DAPSMap map;
    map.amplitudes = amp_grid;
    map.times = time_grid;
    map.signal.resize(time_grid.size(), amp_grid.size());
    map.meta = {describe(c), opt.mode, params, opt.pulse, opt.noise_sigma, opt.seed, opt.subtract_baseline};

    parallel_rows(time_grid.size(), opt.threads, [&](Eigen::Index r) {
        const double plateau = time_grid[r];
        Waveform pulse;
        StepFunction step;
        const double t_eval = opt.pulse.ramp_time + plateau;
        if (opt.mode == DapsMode::ode)
            pulse = distorted_pulse(c, opt.pulse, plateau);
        else
            step = distorted_step(c, opt.pulse, t_eval);

        for (Eigen::Index a = 0; a < amp_grid.size(); ++a) {
            const double amp = amp_grid[a];
            double w = 0.0;
            try {
                for (const auto& wp : params) {
                    const TwoLevelParams& p = wp.params;
                    double wi = 0.0;
                    switch (opt.mode) {
                    case DapsMode::ode: {
                        const Waveform det(amp * pulse.samples, pulse.sample_period, pulse.t0);
                        wi = lindblad_final_w(p, det, ground_state(det[0] - p.eps0, p.t_c), opt.rel_tol);
                        break;
                    }
                    case DapsMode::integral:
                        // a zero-amplitude baseline column sits at eps = 0 for the whole pulse
                        wi = amp == 0.0 ? 1.0 - std::exp(-gamma_steady(0.0, p) * t_eval)
                                        : daps_signal_integral(t_eval, amp, step, p);
                        break;
                    case DapsMode::delta:
                        wi = amp == 0.0 ? 0.0 : daps_signal_delta(t_eval, amp, step, p);
                        break;
                    }
                    w += wp.weight * wi;
                }
            } catch (const std::exception& e) {
                throw SweepError("sweep cell (plateau " + std::to_string(plateau) + " ns, amplitude "
                                 + std::to_string(amp) + " rad/ns): " + e.what());
            }
            if (opt.noise_sigma > 0.0) {
                auto rng = cell_rng(opt.seed, r, a);
                std::normal_distribution<double> noise(0.0, opt.noise_sigma);
                w += noise(rng);
            }
            map.signal(r, a) = w;
        }
        if (opt.subtract_baseline) {
            Eigen::Index k0;
            amp_grid.cwiseAbs().minCoeff(&k0);
            map.signal.row(r).array() -= map.signal(r, k0);
        }
    });
    return map;
}

DAPSMap run_daps_sweep(const DistortionChannel& c, const TwoLevelParams& params, const Eigen::VectorXd& amp_grid,
                       const Eigen::VectorXd& time_grid, const SweepOptions& opt)
{
    return run_daps_sweep(c, std::vector<WeightedParams>{{params, 1.0}}, amp_grid, time_grid, opt);
}

DAPSMap average_maps(const std::vector<DAPSMap>& maps)
{
    if (maps.empty())
        throw std::invalid_argument("average_maps: no maps");
    DAPSMap out = maps.front();
    for (size_t k = 1; k < maps.size(); ++k) {
        if (maps[k].amplitudes != out.amplitudes || maps[k].times != out.times)
            throw std::invalid_argument("average_maps: grids differ");
        out.signal += maps[k].signal;
    }
    out.signal /= static_cast<double>(maps.size());
    return out;
}

namespace {

Eigen::VectorXd median3(const Eigen::VectorXd& y)
{
    Eigen::VectorXd m = y;
    for (Eigen::Index i = 1; i + 1 < y.size(); ++i) {
        double a = y[i - 1], b = y[i], c = y[i + 1];
        m[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
    }
    return m;
}

double half_width_guess(const Eigen::VectorXd& x, const Eigen::VectorXd& ym, Eigen::Index i, double base)
{
    const double half = base + 0.5 * (ym[i] - base);
    Eigen::Index l = i, r = i;
    while (l > 0 && ym[l] > half)
        --l;
    while (r + 1 < ym.size() && ym[r] > half)
        ++r;
    const double step = (x[x.size() - 1] - x[0]) / static_cast<double>(std::max<Eigen::Index>(1, x.size() - 1));
    return std::max(0.5 * (x[r] - x[l]), step);
}

Eigen::VectorXd lorentz_sum(const Eigen::VectorXd& p, const Eigen::VectorXd& x)
{
    Eigen::VectorXd m = Eigen::VectorXd::Constant(x.size(), p[0]);
    for (Eigen::Index k = 1; k + 2 < p.size(); k += 3) {
        const double g2 = p[k + 2] * p[k + 2];
        m.array() += p[k] * g2 / ((x.array() - p[k + 1]).square() + g2);
    }
    return m;
}

} // namespace

PeakFit fit_lorentzian_row(const Eigen::VectorXd& x_all, const Eigen::VectorXd& y_all, const FitOptions& opt,
                           std::uint64_t row_seed)
{
    PeakFit out;
    const Eigen::Index n = x_all.size();
    if (n != y_all.size())
        throw std::invalid_argument("fit_lorentzian_row: size mismatch");
    if (n < 8)
        throw std::invalid_argument("fit_lorentzian_row: need at least 8 samples per row");
    if (!y_all.allFinite()) {
        out.reason = "non-finite samples";
        return out;
    }
    const double range = y_all.maxCoeff() - y_all.minCoeff();
    if (!(range > 1e-12)) {
        out.reason = "flat row";
        return out;
    }
    const bool two = opt.model == FitOptions::Model::double_peak;

    const Eigen::VectorXd ym = median3(y_all);
    Eigen::Index ipk;
    ym.maxCoeff(&ipk);
    const double base = ym.minCoeff();

    Eigen::Index lo = 0, hi = n - 1;
    if (opt.local_fraction > 0.0 && !two) {
        const double thr = opt.local_fraction * ym[ipk];
        lo = hi = ipk;
        while (lo > 0 && ym[lo - 1] > thr)
            --lo;
        while (hi + 1 < n && ym[hi + 1] > thr)
            ++hi;
        lo = std::max<Eigen::Index>(0, std::min<Eigen::Index>(lo, ipk - opt.min_half_points));
        hi = std::min<Eigen::Index>(n - 1, std::max<Eigen::Index>(hi, ipk + opt.min_half_points));
    }
    const Eigen::VectorXd x = x_all.segment(lo, hi - lo + 1);
    const Eigen::VectorXd y = y_all.segment(lo, hi - lo + 1);
    const Eigen::Index m = x.size();
    const int n_par = two ? 7 : 4;
    if (m <= n_par) {
        out.reason = "too few points in fit region";
        return out;
    }

    Eigen::VectorXd p0(n_par);
    if (!two) {
        p0 << base, ym[ipk] - base, x_all[ipk], half_width_guess(x_all, ym, ipk, base);
    } else {
        std::vector<Eigen::Index> maxima;
        for (Eigen::Index i = 1; i + 1 < n; ++i)
            if (ym[i] > ym[i - 1] && ym[i] >= ym[i + 1])
                maxima.push_back(i);
        if (maxima.size() < 2) {
            out.reason = "fewer than two local maxima";
            return out;
        }
        std::sort(maxima.begin(), maxima.end(), [&](auto a, auto b) { return ym[a] > ym[b]; });
        Eigen::Index i1 = std::min(maxima[0], maxima[1]), i2 = std::max(maxima[0], maxima[1]);
        const double sep = x_all[i2] - x_all[i1];
        const double g1 = std::min(half_width_guess(x_all, ym, i1, base), 0.5 * sep);
        const double g2 = std::min(half_width_guess(x_all, ym, i2, base), 0.5 * sep);
        p0 << base, ym[i1] - base, x_all[i1], g1, ym[i2] - base, x_all[i2], g2;
    }

    auto residual = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return lorentz_sum(p, x) - y; };

    auto assess = [&](const LsqResult<double>& r, PeakFit& f) {
        f = PeakFit{};
        f.rss = r.rss;
        if (!r.converged) {
            f.reason = "no convergence";
            return false;
        }
        if (!r.params.allFinite() || !r.covariance.allFinite()) {
            f.reason = "non-finite fit";
            return false;
        }
        f.baseline = r.params[0];
        for (int k = 1; k + 2 < n_par; k += 3) {
            Lorentzian l{r.params[k], r.params[k + 1], std::abs(r.params[k + 2]), r.stderr_of(k + 1), r.stderr_of(k),
                         r.stderr_of(k + 2)};
            if (!(l.height > 0.0) || !(l.gamma > 0.0)) {
                f.reason = "non-positive height or width";
                return false;
            }
            if (l.center < x[0] || l.center > x[m - 1]) {
                f.reason = "center outside the fitted range";
                return false;
            }
            f.peaks.push_back(l);
        }
        std::sort(f.peaks.begin(), f.peaks.end(), [](const auto& a, const auto& b) { return a.center < b.center; });
        f.ok = true;
        return true;
    };

    std::mt19937_64 rng(row_seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXd p = p0;
    for (int attempt = 0; attempt <= opt.max_restarts; ++attempt) {
        if (attempt > 0) {
            p = p0;
            for (int k = 1; k + 2 < n_par; k += 3) {
                p[k] *= 1.0 + 0.2 * u(rng);
                p[k + 1] += 0.5 * p0[k + 2] * u(rng);
                p[k + 2] *= std::exp(0.5 * u(rng));
            }
        }
        const auto r = levenberg_marquardt<double>(residual, p);
        if (assess(r, out))
            return out;
    }
    return out;
}

PeakTrack fit_peaks(const DAPSMap& map, const FitOptions& opt)
{
    if (map.amplitudes.size() < 8)
        throw std::invalid_argument("fit_peaks: each row needs at least 8 amplitude samples");
    if (opt.model == FitOptions::Model::double_peak && !opt.side)
        throw std::invalid_argument("fit_peaks: the double model needs an explicit peak designation (left/right)");
    const Eigen::Index rows = map.times.size();
    PeakTrack t;
    t.model = opt.model;
    t.times = map.times;
    t.eps_max = Eigen::VectorXd::Constant(rows, std::numeric_limits<double>::quiet_NaN());
    t.stderr_ = t.eps_max;
    t.height = t.eps_max;
    t.fwhm = t.eps_max;
    t.defined.assign(static_cast<size_t>(rows), false);
    t.notes.assign(static_cast<size_t>(rows), "");
    for (Eigen::Index r = 0; r < rows; ++r) {
        const PeakFit f = fit_lorentzian_row(map.amplitudes, map.signal.row(r).transpose(), opt,
                                             opt.seed * 1000003ULL + static_cast<std::uint64_t>(r));
        if (!f.ok) {
            t.notes[static_cast<size_t>(r)] = f.reason;
            continue;
        }
        const Lorentzian& l = (opt.model == FitOptions::Model::double_peak && *opt.side == FitOptions::Side::right)
                                  ? f.peaks.back()
                                  : f.peaks.front();
        if (!(l.center > 0.0)) {
            t.notes[static_cast<size_t>(r)] = "non-positive center";
            continue;
        }
        t.eps_max[r] = l.center;
        t.stderr_[r] = l.center_err;
        t.height[r] = l.height;
        t.fwhm[r] = 2.0 * l.gamma;
        t.defined[static_cast<size_t>(r)] = true;
    }
    return t;
}

Waveform StepResponseEstimate::waveform() const
{
    if (times.size() < 1)
        throw std::invalid_argument("step estimate: empty");
    for (bool d : defined)
        if (!d)
            throw std::invalid_argument("step estimate: undefined points");
    double period = 1.0;
    if (times.size() > 1) {
        period = times[1] - times[0];
        for (Eigen::Index i = 2; i < times.size(); ++i)
            if (std::abs(times[i] - times[i - 1] - period) > 1e-9 * period)
                throw std::invalid_argument("step estimate: non-uniform time grid");
    }
    return {s, period, times[0]};
}

StepResponseEstimate reconstruct_step(const PeakTrack& track, double ref_time)
{
    const Eigen::Index n = track.times.size();
    double e0 = std::numeric_limits<double>::quiet_NaN(), s0 = 0.0;
    Eigen::Index exact = -1;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(track.times[i] - ref_time) <= 1e-9 * std::max(1.0, std::abs(ref_time)))
            exact = i;
    if (exact >= 0) {
        if (!track.defined[static_cast<size_t>(exact)])
            throw std::invalid_argument("reconstruct_step: track undefined at the reference time");
        e0 = track.eps_max[exact];
        s0 = track.stderr_[exact];
    } else {
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            if (track.times[i] < ref_time && ref_time < track.times[i + 1]) {
                if (!track.defined[static_cast<size_t>(i)] || !track.defined[static_cast<size_t>(i + 1)])
                    throw std::invalid_argument("reconstruct_step: track undefined next to the reference time");
                const double f = (ref_time - track.times[i]) / (track.times[i + 1] - track.times[i]);
                e0 = (1.0 - f) * track.eps_max[i] + f * track.eps_max[i + 1];
                s0 = (1.0 - f) * track.stderr_[i] + f * track.stderr_[i + 1];
            }
        }
        if (!std::isfinite(e0))
            throw std::invalid_argument("reconstruct_step: reference time outside the track");
    }

    StepResponseEstimate est;
    est.times = track.times;
    est.ref_time = ref_time;
    est.eps0_est = e0;
    est.defined = track.defined;
    est.s = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    est.stderr_ = est.s;
    double prev = -std::numeric_limits<double>::infinity(), prev_err = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!track.defined[static_cast<size_t>(i)])
            continue;
        est.s[i] = e0 / track.eps_max[i];
        if (i == exact) {
            est.stderr_[i] = 0.0;
        } else {
            const double a = s0 / e0, b = track.stderr_[i] / track.eps_max[i];
            est.stderr_[i] = std::abs(est.s[i]) * std::sqrt(a * a + b * b);
        }
        // a drop counts only when it exceeds the combined standard error
        const double err = std::isfinite(est.stderr_[i]) ? est.stderr_[i] : 0.0;
        if (est.s[i] < prev - std::hypot(err, prev_err))
            est.monotone = false;
        prev = est.s[i];
        prev_err = err;
    }
    return est;
}

Visibility visibility(const Eigen::VectorXd& amplitudes, const Eigen::VectorXd& row)
{
    Visibility v;
    const PeakFit f = fit_lorentzian_row(amplitudes, row, FitOptions{});
    if (!f.ok)
        return v;
    v.defined = true;
    v.height = f.peaks[0].height;
    v.fwhm = 2.0 * f.peaks[0].gamma;
    v.value = v.height / v.fwhm;
    return v;
}

double optimal_plateau_estimate(const TwoLevelParams& p)
{
    if (!(p.t_c > 0.0))
        throw std::invalid_argument("optimal_plateau_estimate: t_c must be > 0");
    return std::numbers::pi * std::numbers::pi * p.kappa / (4.0 * p.t_c * p.t_c * p.t_c);
}

double overshoot_factor(const DAPSMap& map, const DistortionChannel& c, const TwoLevelParams& p)
{
    if (map.times.size() != 1)
        throw std::invalid_argument("overshoot_factor: map must hold a single plateau time");
    const Eigen::VectorXd& a = map.amplitudes;
    const Eigen::Index n = a.size();
    if (n < 3)
        throw std::invalid_argument("overshoot_factor: amplitude grid too coarse");
    const double crit = critical_amplitude(c, map.meta.pulse, map.times[0], p);
    if (crit < a[0] || crit > a[n - 1])
        throw std::invalid_argument("overshoot_factor: critical amplitude outside the amplitude grid");

    const Eigen::VectorXd w = map.signal.row(0).transpose();
    Eigen::Index i;
    w.maxCoeff(&i);
    double a_max = a[i];
    if (i > 0 && i + 1 < n) {
        const double x0 = a[i - 1], x1 = a[i], x2 = a[i + 1];
        const double y0 = w[i - 1], y1 = w[i], y2 = w[i + 1];
        const double den = (x0 - x1) * (x0 - x2) * (x1 - x2);
        const double A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
        const double B = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
        if (A < 0.0)
            a_max = -B / (2.0 * A);
    }
    return a_max - crit;
}

} // namespace cryo
