#include "cryo/cli/commands.hpp"

#include "cryo/io.hpp"
#include "cryo/units.hpp"

#include <algorithm>
#include <cmath>

namespace cryo::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

// JSON has no inf/nan; non-finite values are written as null.
ojson num(double v)
{
    return std::isfinite(v) ? ojson(v) : ojson(nullptr);
}

std::string dump(const ojson& j)
{
    return j.dump(2) + "\n";
}

// Notes may carry commas; keep CSV fields splittable.
std::string csv_safe(std::string s)
{
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

class Writer {
public:
    explicit Writer(fs::path dir) : dir_(std::move(dir)) {}
    void operator()(const std::string& name, const std::string& content)
    {
        const fs::path p = dir_ / name;
        io::atomic_write(p, content);
        written_.push_back(p);
    }
    Written done() { return std::move(written_); }

private:
    fs::path dir_;
    Written written_;
};

ojson params_json(const std::vector<WeightedParams>& ps)
{
    ojson a = ojson::array();
    for (const auto& wp : ps)
        a.push_back({{"eps0_ghz", rad_to_ghz(wp.params.eps0)},
                     {"tc_ghz", rad_to_ghz(wp.params.t_c)},
                     {"kappa_ghz", rad_to_ghz(wp.params.kappa)},
                     {"weight", wp.weight}});
    return a;
}

ojson pulse_json(const PulseConfig& p)
{
    return {{"ramp_ns", p.ramp_time},
            {"awg_period_ns", p.awg_period},
            {"sim_period_ns", p.sim_period},
            {"pre_pad_ns", p.pre_pad},
            {"post_pad_ns", p.post_pad}};
}

ojson loop_json(const LoopReport& r, double tol)
{
    return {{"max_plateau_ripple", num(r.max_plateau_ripple)},
            {"settling_time_ns", num(r.settling_time)},
            {"settle_tolerance", tol},
            {"overshoot_n0", num(r.overshoot_n0)},
            {"sample_period_ns", r.response.sample_period}};
}

template <typename T>
const T& need(const std::optional<T>& v, const std::string& what)
{
    if (!v)
        throw ConfigError("config." + what + ": required for this command");
    return *v;
}

} // namespace

const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"simulate-daps", "calibrate", "verify-loop", "chirp", "noise-kappa"};
    return names;
}

Written run_command(const std::string& verb, const RunConfig& cfg, const fs::path& out)
{
    if (verb == "simulate-daps")
        return cmd_simulate_daps(cfg, out);
    if (verb == "calibrate")
        return cmd_calibrate(cfg, out);
    if (verb == "verify-loop")
        return cmd_verify_loop(cfg, out);
    if (verb == "chirp")
        return cmd_chirp(cfg, out);
    if (verb == "noise-kappa")
        return cmd_noise_kappa(cfg, out);
    throw CommandError("unknown command '" + verb + "'");
}

Written cmd_simulate_daps(const RunConfig& cfg, const fs::path& out)
{
    const auto& sw = need(cfg.sweep, "sweep");
    if (cfg.systems.empty())
        throw ConfigError("config.system: required for simulate-daps");
    const DistortionChannel channel = cfg.channel.value_or(DistortionChannel::identity());
    SweepOptions opt = sw.options;
    opt.seed = cfg.seed;
    opt.threads = cfg.threads;
    const DAPSMap map = run_daps_sweep(channel, cfg.systems, sw.amplitudes, sw.plateaus, opt);

    io::AxisMatrix m{"plateau_ns\\amplitude_ghz", map.amplitudes / two_pi, map.times, map.signal};
    ojson meta;
    meta["kind"] = "daps_map";
    meta["channel"] = map.meta.channel;
    meta["mode"] = to_string(map.meta.mode);
    meta["systems"] = params_json(map.meta.params);
    meta["pulse"] = pulse_json(map.meta.pulse);
    meta["noise_sigma"] = map.meta.noise_sigma;
    meta["seed"] = map.meta.seed;
    meta["baseline_subtracted"] = map.meta.baseline_subtracted;
    meta["signal"] = "w = 2 p_e at the end of the pulse (0 ground, 1 fully mixed)";
    meta["amplitude_units"] = "GHz (cyclic); internal rad/ns = 2 pi x GHz";
    meta["rows"] = map.times.size();
    meta["cols"] = map.amplitudes.size();
    meta["config"] = cfg.source;

    Writer w(out);
    w("daps_map.csv", io::axis_matrix_csv(m));
    w("daps_map.json", dump(meta));
    return w.done();
}

DAPSMap load_daps_map_csv(const fs::path& p)
{
    const io::AxisMatrix m = io::parse_axis_matrix_csv(io::read_text(p));
    DAPSMap map;
    map.amplitudes = m.col_axis * two_pi;
    map.times = m.row_axis;
    map.signal = m.values;
    map.validate();
    return map;
}

Written cmd_calibrate(const RunConfig& cfg, const fs::path& out)
{
    const auto& cal = need(cfg.calibrate, "calibrate");
    const fs::path map_path = cfg.resolve(cal.map);
    DAPSMap map;
    try {
        map = load_daps_map_csv(map_path);
    } catch (const std::exception& e) {
        throw CommandError(map_path.string() + ": " + e.what());
    }
    FitOptions fo = cfg.fit;
    fo.seed = cfg.seed;
    const PeakTrack track = fit_peaks(map, fo);

    Writer w(out);
    std::string tcsv = "t_ns,eps_max_ghz,stderr_ghz,height,fwhm_ghz,defined,note\n";
    for (Eigen::Index i = 0; i < track.times.size(); ++i)
        tcsv += io::fmt(track.times[i]) + "," + io::fmt(track.eps_max[i] / two_pi) + ","
            + io::fmt(track.stderr_[i] / two_pi) + "," + io::fmt(track.height[i]) + ","
            + io::fmt(track.fwhm[i] / two_pi) + "," + (track.defined[i] ? "1" : "0") + ","
            + csv_safe(track.notes[i]) + "\n";
    w("peak_track.csv", tcsv);

    std::string undefined;
    for (Eigen::Index i = 0; i < track.times.size(); ++i)
        if (!track.defined[i])
            undefined += "\n  t = " + io::fmt(track.times[i]) + " ns: " + track.notes[i];
    if (!undefined.empty())
        throw CommandError("calibrate: peak track undefined at" + undefined);

    const StepResponseEstimate est = reconstruct_step(track, cal.ref_time);
    w("step_response.csv", io::series_csv(est.times, est.s, est.stderr_));

    Waveform step = est.waveform();
    Waveform h = impulse_from_step(step);
    h.samples *= h.sample_period; // dimensionless taps
    w("impulse.csv", io::waveform_csv(h));

    const Inversion inv = invert_to_fir(h, cal.fir_len, cal.invert);
    const FIRCoefficients fir = adjust_overshoot(inv.fir, cal.adjustments);
    w("fir.json", fir_json(fir));

    ojson rep;
    rep["kind"] = "calibration_report";
    rep["map"] = cal.map.string();
    rep["ref_time_ns"] = est.ref_time;
    rep["eps0_est_ghz"] = num(est.eps0_est / two_pi);
    rep["monotone"] = est.monotone;
    rep["fir_len"] = cal.fir_len;
    rep["method"] = cal.invert.method == InvertOptions::Method::exact ? "exact" : "least_squares";
    rep["lambda"] = cal.invert.lambda;
    rep["noise_floor"] = cal.invert.noise_floor ? ojson(*cal.invert.noise_floor) : ojson(nullptr);
    rep["max_inverse_residual"] = num(inv.max_residual);
    ojson adj = ojson::array();
    for (const auto& [i, d] : fir.adjustments)
        adj.push_back({i, d});
    rep["adjustments"] = adj;
    if (cfg.channel) {
        const double tol = 0.01;
        const LoopReport lr = verify_loop(*cfg.channel, fir, cal.loop_samples, cal.window, tol);
        rep["loop"] = loop_json(lr, tol);
    } else {
        rep["loop"] = nullptr;
    }
    rep["config"] = cfg.source;
    w("calibration_report.json", dump(rep));
    return w.done();
}

Written cmd_verify_loop(const RunConfig& cfg, const fs::path& out)
{
    const auto& v = need(cfg.verify, "verify");
    const auto& channel = need(cfg.channel, "channel");
    const fs::path fir_path = cfg.resolve(v.fir);
    FIRCoefficients fir;
    try {
        fir = parse_fir_json(io::read_text(fir_path));
    } catch (const std::exception& e) {
        throw CommandError(fir_path.string() + ": " + e.what());
    }
    const double tol = 0.01;
    const LoopReport r = verify_loop(channel, fir, v.samples, v.window, tol);
    ojson rep = loop_json(r, tol);
    rep["kind"] = "loop_report";
    rep["fir"] = v.fir.string();
    rep["fir_len"] = fir.b.size();
    rep["config"] = cfg.source;

    Writer w(out);
    w("loop_report.json", dump(rep));
    w("loop_response.csv", io::waveform_csv(r.response));
    return w.done();
}

Written cmd_chirp(const RunConfig& cfg, const fs::path& out)
{
    const auto& c = need(cfg.chirp, "chirp");
    Writer w(out);
    Waveform trace = c.trace ? io::load_waveform(cfg.resolve(*c.trace))
                             : synth_exchange_signal(*c.synth, c.duration, c.sample_period);
    if (c.synth)
        w("trace.csv", io::waveform_csv(trace));
    const ChirpAnalysis a = analyze_chirp(trace, c.analysis);

    std::string fcsv = "t_start_ns,t_center_ns,omega_rad_per_ns,freq_mhz,stderr_mhz,valid,note\n";
    for (const auto& f : a.fits)
        fcsv += io::fmt(f.t_start) + "," + io::fmt(f.t_start + 0.5 * c.analysis.fit_window) + ","
            + io::fmt(f.omega) + "," + io::fmt(f.omega / two_pi * 1e3) + "," + io::fmt(f.stderr_ / two_pi * 1e3)
            + "," + (f.valid ? "1" : "0") + "," + csv_safe(f.note) + "\n";
    w("sliding_fit.csv", fcsv);

    const Spectrogram& s = a.spectrogram;
    w("spectrogram.csv", io::axis_matrix_csv({"freq_mhz\\t_ns", s.times, s.freqs, s.magnitude}));
    w("radon.csv", io::axis_matrix_csv({"angle_deg\\offset_px", a.radon.offsets, a.radon.angles, a.radon.response}));

    ojson sum;
    sum["kind"] = "chirp_summary";
    sum["source"] = c.trace ? ojson(c.trace->string()) : ojson("synthesized");
    sum["peak_angle_deg"] = a.peak_angle;
    sum["angle_step_deg"] = c.analysis.angle_step;
    sum["sliding_fit_slope_mhz_per_ns"] = num(a.slope_mhz_per_ns);
    if (c.synth) {
        const auto& p = *c.synth;
        sum["params"] = {{"A1", p.A1}, {"A2", p.A2}, {"B1_mhz", p.B1}, {"B2_mhz", p.B2},
                         {"C_mhz", p.C},   {"D", p.D},   {"t0_ns", p.t0}};
        sum["expected_slope_mhz_per_ns"] = p.chirp_slope_mhz_per_ns();
    }
    sum["spectrogram"] = {{"window", to_string(s.window)},
                          {"window_ns", s.window_len},
                          {"hop_ns", s.hop},
                          {"nfft", s.nfft},
                          {"detrend_frames", s.options.detrend_frames},
                          {"normalize_frames", s.options.normalize_frames}};
    sum["radon_normalization"] = a.radon.normalization;
    sum["units"] = "time ns, frequency MHz; phase 2 pi (B t 1e-3 + C^2 t^2 1e-6)";
    sum["config"] = cfg.source;
    w("chirp_summary.json", dump(sum));
    return w.done();
}

Written cmd_noise_kappa(const RunConfig& cfg, const fs::path& out)
{
    const auto& n = need(cfg.noise, "noise");
    Writer w(out);
    ojson fits = ojson::array();
    for (Eigen::Index k = 0; k < n.eps.size(); ++k) {
        const CoherenceCurve curve = coherence_chi0(n.times, n.eps[k], n.t_c, n.spec);
        const KappaFit f = fit_kappa(curve);
        std::string csv = "t_ns,coherence\n";
        for (Eigen::Index i = 0; i < curve.times.size(); ++i)
            csv += io::fmt(curve.times[i]) + "," + io::fmt(curve.coherence[i]) + "\n";
        const std::string name = "coherence_" + std::to_string(k) + ".csv";
        w(name, csv);
        fits.push_back({{"index", k},
                        {"eps_ghz", rad_to_ghz(n.eps[k])},
                        {"file", name},
                        {"ill_posed", f.ill_posed},
                        {"kappa_per_ns2", f.ill_posed ? ojson(nullptr) : num(f.kappa)},
                        {"stderr_per_ns2", f.ill_posed ? ojson(nullptr) : num(f.stderr_)}});
    }
    ojson rep;
    rep["kind"] = "kappa_fit";
    rep["tc_ghz"] = rad_to_ghz(n.t_c);
    rep["noise"] = {{"A_1Hz_ueV", n.spec.A_1Hz},
                    {"beta", n.spec.beta},
                    {"f_low_hz", n.spec.f_low},
                    {"f_high_hz", n.spec.f_high}};
    rep["cutoff_note"] = "fitted kappa grows logarithmically as f_low decreases";
    rep["model"] = "coherence = exp(-kappa t^2)";
    rep["fits"] = fits;
    rep["config"] = cfg.source;
    w("kappa_fit.json", dump(rep));
    return w.done();
}

} // namespace cryo::cli
