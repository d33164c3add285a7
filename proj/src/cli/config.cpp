#include "cryo/cli/config.hpp"

#include "cryo/io.hpp"
#include "cryo/units.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

namespace cryo::cli {

using nlohmann::json;

namespace {

std::string type_name(const json& j)
{
    return j.type_name();
}

class Node {
public:
    Node(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(path_ + ": expected an object, got " + type_name(j_));
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& key) const { return path_ + "." + key; }

    bool has(const std::string& key)
    {
        if (!j_.contains(key))
            return false;
        used_.insert(key);
        return true;
    }

    bool has_value(const std::string& key) { return has(key) && !j_.at(key).is_null(); }

    const json& raw(const std::string& key)
    {
        if (!has(key))
            throw ConfigError(at(key) + ": required key missing");
        return j_.at(key);
    }

    double num(const std::string& key) { return as_num(raw(key), at(key)); }
    double num(const std::string& key, double def) { return has_value(key) ? num(key) : def; }

    int integer(const std::string& key, int def)
    {
        if (!has_value(key))
            return def;
        const json& v = j_.at(key);
        if (!v.is_number_integer())
            throw ConfigError(at(key) + ": expected an integer, got " + type_name(v));
        return v.get<int>();
    }

    bool boolean(const std::string& key, bool def)
    {
        if (!has_value(key))
            return def;
        const json& v = j_.at(key);
        if (!v.is_boolean())
            throw ConfigError(at(key) + ": expected true or false, got " + type_name(v));
        return v.get<bool>();
    }

    std::string str(const std::string& key)
    {
        const json& v = raw(key);
        if (!v.is_string())
            throw ConfigError(at(key) + ": expected a string, got " + type_name(v));
        return v.get<std::string>();
    }
    std::string str(const std::string& key, const std::string& def) { return has_value(key) ? str(key) : def; }

    Node child(const std::string& key) { return Node(raw(key), at(key)); }

    /// Rejects keys outside `allowed` before anything else is read.
    void allow(std::initializer_list<const char*> allowed) const
    {
        for (const auto& [k, v] : j_.items())
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end())
                throw ConfigError(path_ + "." + k + ": unknown key");
    }

    void finish() const
    {
        for (const auto& [k, v] : j_.items())
            if (!used_.count(k))
                throw ConfigError(path_ + "." + k + ": unknown key");
    }

    static double as_num(const json& v, const std::string& where)
    {
        if (!v.is_number())
            throw ConfigError(where + ": expected a number, got " + type_name(v));
        const double d = v.get<double>();
        if (!std::isfinite(d))
            throw ConfigError(where + ": not finite");
        return d;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <typename F>
auto guarded(const std::string& where, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

Eigen::VectorXd parse_grid(const json& j, const std::string& where)
{
    if (j.is_array()) {
        Eigen::VectorXd g(static_cast<Eigen::Index>(j.size()));
        for (size_t i = 0; i < j.size(); ++i)
            g[static_cast<Eigen::Index>(i)] = Node::as_num(j[i], where + "[" + std::to_string(i) + "]");
        if (g.size() == 0)
            throw ConfigError(where + ": empty grid");
        return g;
    }
    Node n(j, where);
    n.allow({"start", "stop", "count", "step"});
    const double a = n.num("start"), b = n.num("stop");
    Eigen::VectorXd g;
    if (n.has("count")) {
        const int c = n.integer("count", 0);
        if (c < 1)
            throw ConfigError(n.at("count") + ": must be >= 1");
        if (c == 1)
            g = Eigen::VectorXd::Constant(1, a);
        else
            g = Eigen::VectorXd::LinSpaced(c, a, b);
    } else {
        const double s = n.num("step");
        if (!(s > 0.0))
            throw ConfigError(n.at("step") + ": must be > 0");
        const auto c = static_cast<Eigen::Index>(std::floor((b - a) / s + 1e-9)) + 1;
        if (c < 1)
            throw ConfigError(where + ": stop < start");
        g = Eigen::VectorXd::LinSpaced(c, a, a + static_cast<double>(c - 1) * s);
    }
    n.finish();
    return g;
}

void require_increasing(const Eigen::VectorXd& g, const std::string& where)
{
    for (Eigen::Index i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1]))
            throw ConfigError(where + ": grid must be strictly increasing");
}

WeightedParams parse_system(const json& j, const std::string& where)
{
    Node n(j, where);
    n.allow({"eps0_ghz", "tc_ghz", "kappa_ghz", "weight"});
    const double eps0 = n.num("eps0_ghz"), tc = n.num("tc_ghz"), kappa = n.num("kappa_ghz");
    const double weight = n.num("weight", 1.0);
    n.finish();
    WeightedParams wp;
    wp.params = guarded(where, [&] { return TwoLevelParams::from_ghz(eps0, tc, kappa); });
    wp.weight = weight;
    return wp;
}

SweepSection parse_sweep(Node n)
{
    n.allow({"amplitudes_ghz", "plateau_ns", "mode", "noise_sigma", "ramp_ns", "awg_period_ns", "sim_period_ns", "pre_pad_ns", "post_pad_ns", "rel_tol", "subtract_baseline"});
    SweepSection s;
    s.amplitudes = parse_grid(n.raw("amplitudes_ghz"), n.at("amplitudes_ghz")) * two_pi;
    s.plateaus = parse_grid(n.raw("plateau_ns"), n.at("plateau_ns"));
    require_increasing(s.amplitudes, n.at("amplitudes_ghz"));
    require_increasing(s.plateaus, n.at("plateau_ns"));
    if (s.plateaus.minCoeff() <= 0.0)
        throw ConfigError(n.at("plateau_ns") + ": plateau times must be > 0");
    auto& o = s.options;
    o.mode = guarded(n.at("mode"), [&] { return daps_mode_from_string(n.str("mode", "ode")); });
    o.noise_sigma = n.num("noise_sigma", 0.0);
    if (o.noise_sigma < 0.0)
        throw ConfigError(n.at("noise_sigma") + ": must be >= 0");
    o.pulse.ramp_time = n.num("ramp_ns", 0.0);
    o.pulse.awg_period = n.num("awg_period_ns", 1.0);
    o.pulse.sim_period = n.num("sim_period_ns", 0.002);
    o.pulse.pre_pad = n.num("pre_pad_ns", 1.0);
    o.pulse.post_pad = n.num("post_pad_ns", 10.0);
    o.rel_tol = n.num("rel_tol", 1e-7);
    o.subtract_baseline = n.boolean("subtract_baseline", false);
    if (o.pulse.ramp_time < 0.0 || o.pulse.pre_pad < 0.0 || o.pulse.post_pad < 0.0)
        throw ConfigError(n.path() + ": ramp_ns and padding must be >= 0");
    if (!(o.pulse.sim_period > 0.0) || !(o.pulse.awg_period > 0.0))
        throw ConfigError(n.path() + ": sample periods must be > 0");
    if (!(o.rel_tol > 1e-12 && o.rel_tol < 1e-2))
        throw ConfigError(n.at("rel_tol") + ": must lie in (1e-12, 1e-2)");
    n.finish();
    return s;
}

FitOptions parse_fit(Node n)
{
    n.allow({"model", "peak", "local_fraction", "min_half_points", "max_restarts"});
    FitOptions f;
    const std::string model = n.str("model", "single");
    if (model == "single")
        f.model = FitOptions::Model::single;
    else if (model == "double")
        f.model = FitOptions::Model::double_peak;
    else
        throw ConfigError(n.at("model") + ": expected \"single\" or \"double\"");
    if (n.has_value("peak")) {
        const std::string side = n.str("peak");
        if (side == "left")
            f.side = FitOptions::Side::left;
        else if (side == "right")
            f.side = FitOptions::Side::right;
        else
            throw ConfigError(n.at("peak") + ": expected \"left\" or \"right\"");
    }
    if (f.model == FitOptions::Model::double_peak && !f.side)
        throw ConfigError(n.at("peak") + ": the double model needs \"left\" or \"right\"");
    f.local_fraction = n.num("local_fraction", 0.0);
    if (f.local_fraction < 0.0 || f.local_fraction >= 1.0)
        throw ConfigError(n.at("local_fraction") + ": must lie in [0, 1)");
    f.min_half_points = n.integer("min_half_points", 3);
    f.max_restarts = n.integer("max_restarts", 5);
    if (f.min_half_points < 1 || f.max_restarts < 0 || f.max_restarts > 5)
        throw ConfigError(n.path() + ": min_half_points >= 1 and max_restarts in [0, 5]");
    n.finish();
    return f;
}

std::vector<std::pair<int, double>> parse_adjustments(const json& j, const std::string& where)
{
    if (!j.is_array())
        throw ConfigError(where + ": expected an array of [index, delta] pairs");
    std::vector<std::pair<int, double>> out;
    for (size_t i = 0; i < j.size(); ++i) {
        const std::string w = where + "[" + std::to_string(i) + "]";
        const json& e = j[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer())
            throw ConfigError(w + ": expected [integer index, delta]");
        out.emplace_back(e[0].get<int>(), Node::as_num(e[1], w + "[1]"));
    }
    return out;
}

double parse_window(Node& n, const std::string& key)
{
    if (!n.has_value(key))
        return std::numeric_limits<double>::infinity();
    const double w = n.num(key);
    if (!(w > 0.0))
        throw ConfigError(n.at(key) + ": must be > 0");
    return w;
}

CalibrateSection parse_calibrate(Node n)
{
    n.allow({"map", "ref_time_ns", "fir_len", "method", "lambda", "noise_floor", "adjustments", "loop_samples", "window_ns"});
    CalibrateSection c;
    c.map = n.str("map");
    c.ref_time = n.num("ref_time_ns", 20.0);
    c.fir_len = n.integer("fir_len", 20);
    if (c.fir_len < 1)
        throw ConfigError(n.at("fir_len") + ": must be >= 1");
    const std::string method = n.str("method", "exact");
    if (method == "exact")
        c.invert.method = InvertOptions::Method::exact;
    else if (method == "least_squares")
        c.invert.method = InvertOptions::Method::least_squares;
    else
        throw ConfigError(n.at("method") + ": expected \"exact\" or \"least_squares\"");
    c.invert.lambda = n.num("lambda", 0.0);
    if (c.invert.lambda < 0.0)
        throw ConfigError(n.at("lambda") + ": must be >= 0");
    if (n.has_value("noise_floor")) {
        c.invert.noise_floor = n.num("noise_floor");
        if (*c.invert.noise_floor < 0.0)
            throw ConfigError(n.at("noise_floor") + ": must be >= 0");
    }
    if (n.has("adjustments"))
        c.adjustments = parse_adjustments(n.raw("adjustments"), n.at("adjustments"));
    c.loop_samples = n.integer("loop_samples", 60);
    if (c.loop_samples < 2)
        throw ConfigError(n.at("loop_samples") + ": must be >= 2");
    c.window = parse_window(n, "window_ns");
    n.finish();
    return c;
}

VerifySection parse_verify(Node n)
{
    n.allow({"fir", "samples", "window_ns"});
    VerifySection v;
    v.fir = n.str("fir");
    v.samples = n.integer("samples", 60);
    if (v.samples < 2)
        throw ConfigError(n.at("samples") + ": must be >= 2");
    v.window = parse_window(n, "window_ns");
    n.finish();
    return v;
}

ChirpSignalParams parse_chirp_params(const json& j, const std::string& where)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "chirped")
            return ChirpSignalParams::table_chirped();
        if (s == "unchirped")
            return ChirpSignalParams::table_unchirped();
        throw ConfigError(where + ": expected \"chirped\", \"unchirped\" or an object");
    }
    Node n(j, where);
    n.allow({"A1", "A2", "B1_mhz", "B2_mhz", "C_mhz", "D", "t0_ns"});
    ChirpSignalParams p;
    p.A1 = n.num("A1");
    p.A2 = n.num("A2");
    p.B1 = n.num("B1_mhz");
    p.B2 = n.num("B2_mhz");
    p.C = n.num("C_mhz");
    p.D = n.num("D");
    p.t0 = n.num("t0_ns");
    if (!(p.t0 > 0.0))
        throw ConfigError(n.at("t0_ns") + ": must be > 0");
    n.finish();
    return p;
}

ChirpSection parse_chirp(Node n, const std::filesystem::path&)
{
    n.allow({"trace", "synth", "duration_ns", "sample_period_ns", "window_fn", "window_ns", "hop_ns", "pad", "detrend_frames", "normalize_frames", "angle_step_deg", "remove_mean", "fit_window_ns", "fit_step_ns"});
    ChirpSection c;
    if (n.has_value("trace"))
        c.trace = n.str("trace");
    if (n.has_value("synth"))
        c.synth = parse_chirp_params(n.raw("synth"), n.at("synth"));
    if (c.trace.has_value() == c.synth.has_value())
        throw ConfigError(n.path() + ": give exactly one of \"trace\" or \"synth\"");
    c.duration = n.num("duration_ns", 100.0);
    c.sample_period = n.num("sample_period_ns", 1.0);
    if (!(c.duration > 0.0) || !(c.sample_period > 0.0))
        throw ConfigError(n.path() + ": duration_ns and sample_period_ns must be > 0");
    auto& a = c.analysis;
    a.window = guarded(n.at("window_fn"), [&] { return window_fn_from_string(n.str("window_fn", "hann")); });
    a.window_len = n.num("window_ns", 25.0);
    a.hop = n.num("hop_ns", 1.0);
    a.stft.pad = n.integer("pad", 4);
    a.stft.detrend_frames = n.boolean("detrend_frames", true);
    a.stft.normalize_frames = n.boolean("normalize_frames", true);
    a.angle_step = n.num("angle_step_deg", 1.0);
    a.remove_mean = n.boolean("remove_mean", true);
    a.fit_window = n.num("fit_window_ns", 10.0);
    a.fit_step = n.num("fit_step_ns", 1.0);
    if (!(a.window_len > 0.0) || !(a.hop > 0.0) || a.stft.pad < 1 || !(a.angle_step > 0.0)
        || !(a.fit_window > 0.0) || !(a.fit_step > 0.0))
        throw ConfigError(n.path() + ": window, hop, pad, angle step and fit window/step must be positive");
    n.finish();
    return c;
}

NoiseSection parse_noise(Node n)
{
    n.allow({"A_1Hz_ueV", "beta", "f_low_hz", "f_high_hz", "tc_ghz", "eps_ghz", "times_ns"});
    NoiseSection s;
    s.spec.A_1Hz = n.num("A_1Hz_ueV", 1.0);
    s.spec.beta = n.num("beta", 1.0);
    s.spec.f_low = n.num("f_low_hz", 1.0);
    s.spec.f_high = n.num("f_high_hz", 100e9);
    guarded(n.path(), [&] {
        s.spec.validate();
        return 0;
    });
    s.t_c = ghz_to_rad(n.num("tc_ghz"));
    if (!(s.t_c > 0.0))
        throw ConfigError(n.at("tc_ghz") + ": must be > 0");
    s.eps = parse_grid(n.raw("eps_ghz"), n.at("eps_ghz")) * two_pi;
    s.times = parse_grid(n.raw("times_ns"), n.at("times_ns"));
    require_increasing(s.times, n.at("times_ns"));
    if (s.times.minCoeff() < 0.0)
        throw ConfigError(n.at("times_ns") + ": times must be >= 0");
    n.finish();
    return s;
}

} // namespace

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const
{
    return p.is_absolute() ? p : base_dir / p;
}

DistortionChannel parse_channel(const json& j, const std::string& where, const std::filesystem::path& base_dir)
{
    Node n(j, where);
    n.allow({"kind", "tau_ns", "file", "sample_period_ns", "taps", "stages"});
    const std::string kind = n.str("kind");
    DistortionChannel c;
    if (kind == "identity") {
        c = DistortionChannel::identity();
    } else if (kind == "one_pole") {
        const double tau = n.num("tau_ns");
        if (!(tau > 0.0))
            throw ConfigError(n.at("tau_ns") + ": must be > 0");
        c = DistortionChannel::one_pole(tau);
    } else if (kind == "impulse") {
        if (n.has_value("file")) {
            const auto path = n.str("file");
            c = guarded(n.at("file"), [&] {
                const std::filesystem::path p = path;
                return DistortionChannel::impulse(io::load_waveform(p.is_absolute() ? p : base_dir / p));
            });
        } else {
            const double period = n.num("sample_period_ns");
            const json& taps = n.raw("taps");
            if (!taps.is_array() || taps.empty())
                throw ConfigError(n.at("taps") + ": expected a non-empty array");
            Eigen::VectorXd h(static_cast<Eigen::Index>(taps.size()));
            for (size_t i = 0; i < taps.size(); ++i)
                h[static_cast<Eigen::Index>(i)] = Node::as_num(taps[i], n.at("taps") + "[" + std::to_string(i) + "]");
            c = guarded(n.path(), [&] { return DistortionChannel::impulse(Waveform(h, period)); });
        }
    } else if (kind == "composition") {
        const json& st = n.raw("stages");
        if (!st.is_array())
            throw ConfigError(n.at("stages") + ": expected an array");
        std::vector<DistortionChannel> stages;
        for (size_t i = 0; i < st.size(); ++i)
            stages.push_back(parse_channel(st[i], n.at("stages") + "[" + std::to_string(i) + "]", base_dir));
        c = DistortionChannel::compose(std::move(stages));
    } else {
        throw ConfigError(n.at("kind") + ": unknown channel kind '" + kind
                          + "' (expected identity, one_pole, impulse or composition)");
    }
    n.finish();
    return c;
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir)
{
    RunConfig cfg;
    try {
        cfg.source = nlohmann::ordered_json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    cfg.base_dir = base_dir;
    const json j = json::parse(text);
    Node root(j, "config");
    root.allow({"schema_version", "seed", "threads", "channel", "system", "systems", "sweep", "fit", "calibrate",
                "verify", "chirp", "noise"});
    if (!root.has("schema_version"))
        throw ConfigError("config.schema_version: required key missing");
    if (root.integer("schema_version", 0) != schema_version)
        throw ConfigError("config.schema_version: unsupported version (expected " + std::to_string(schema_version) + ")");

    if (root.has_value("seed")) {
        const json& s = root.raw("seed");
        if (!s.is_number_unsigned())
            throw ConfigError("config.seed: expected a non-negative integer");
        cfg.seed = s.get<std::uint64_t>();
    }
    const int threads = root.integer("threads", 1);
    if (threads < 1)
        throw ConfigError("config.threads: must be >= 1");
    cfg.threads = static_cast<unsigned>(threads);

    if (root.has_value("channel"))
        cfg.channel = parse_channel(root.raw("channel"), "config.channel", base_dir);
    if (root.has_value("system") && root.has_value("systems"))
        throw ConfigError("config: give either \"system\" or \"systems\", not both");
    if (root.has_value("system"))
        cfg.systems.push_back(parse_system(root.raw("system"), "config.system"));
    if (root.has_value("systems")) {
        const json& s = root.raw("systems");
        if (!s.is_array() || s.empty())
            throw ConfigError("config.systems: expected a non-empty array");
        for (size_t i = 0; i < s.size(); ++i)
            cfg.systems.push_back(parse_system(s[i], "config.systems[" + std::to_string(i) + "]"));
    }
    if (root.has_value("sweep"))
        cfg.sweep = parse_sweep(root.child("sweep"));
    if (root.has_value("fit"))
        cfg.fit = parse_fit(root.child("fit"));
    if (root.has_value("calibrate"))
        cfg.calibrate = parse_calibrate(root.child("calibrate"));
    if (root.has_value("verify"))
        cfg.verify = parse_verify(root.child("verify"));
    if (root.has_value("chirp"))
        cfg.chirp = parse_chirp(root.child("chirp"), base_dir);
    if (root.has_value("noise"))
        cfg.noise = parse_noise(root.child("noise"));
    root.finish();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path)
{
    const std::string text = guarded(path.string(), [&] { return io::read_text(path); });
    return parse_config(text, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

} // namespace cryo::cli
