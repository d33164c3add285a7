#include "cryo/filterdesign.hpp"

#include "cryo/io.hpp"

#include <json.hpp>

#include <cmath>

namespace cryo {

FIRCoefficients FIRCoefficients::delta(double sample_period)
{
    FIRCoefficients c;
    c.b = Eigen::VectorXd::Ones(1);
    c.sample_period = sample_period;
    return c;
}

Eigen::MatrixXd build_conv_matrix(const Waveform& h, Eigen::Index input_len)
{
    validate(h);
    if (input_len < h.size())
        throw std::invalid_argument("build_conv_matrix: input_len must be >= len(h)");
    return conv_matrix(h.samples, input_len);
}

Inversion invert_to_fir(const Waveform& h_in, int fir_len, const InvertOptions& opt)
{
    validate(h_in);
    if (fir_len < 1)
        throw std::invalid_argument("invert_to_fir: fir_len must be >= 1");
    Eigen::VectorXd h = h_in.samples;
    const double hmax = h.cwiseAbs().maxCoeff();
    if (opt.noise_floor) {
        const double floor = *opt.noise_floor * hmax;
        Eigen::Index k = h.size() - 1;
        while (k > 0 && std::abs(h[k]) < floor)
            h[k--] = 0.0;
    }
    if (!(std::abs(h[0]) > 1e-9 * hmax))
        throw NonInvertibleError("invert_to_fir: leading tap h[0] is ~0 relative to max|h|; "
                                 "remove the channel delay before inverting");

    Eigen::VectorXd g;
    if (opt.method == InvertOptions::Method::exact) {
        g = causal_inverse(h, fir_len);
    } else {
        const Eigen::MatrixXd H = conv_matrix(h, fir_len);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(H.rows());
        d[0] = 1.0;
        Eigen::MatrixXd A = H.transpose() * H;
        A.diagonal().array() += opt.lambda;
        g = A.ldlt().solve(H.transpose() * d);
    }

    Inversion r;
    r.fir.b = g;
    r.fir.sample_period = h_in.sample_period;
    r.residual = convolve(g, h);
    r.residual[0] -= 1.0;
    r.max_residual = r.residual.head(std::min<Eigen::Index>(fir_len, r.residual.size())).cwiseAbs().maxCoeff();
    return r;
}

FIRCoefficients adjust_overshoot(const FIRCoefficients& c, const std::vector<std::pair<int, double>>& adjustments)
{
    FIRCoefficients out = c;
    for (const auto& [index, delta] : adjustments) {
        if (index < 0 || index >= out.b.size())
            throw std::invalid_argument("adjust_overshoot: index " + std::to_string(index) + " outside [0, "
                                        + std::to_string(out.b.size()) + ")");
        out.b[index] += delta;
        out.adjustments.emplace_back(index, delta);
    }
    return out;
}

Waveform apply_predistortion(const Waveform& x, const FIRCoefficients& c, double window)
{
    validate(x);
    if (c.b.size() == 0)
        throw std::invalid_argument("apply_predistortion: empty filter");
    if (std::abs(c.sample_period - x.sample_period) > 1e-12 * x.sample_period)
        throw std::invalid_argument("apply_predistortion: filter and waveform sample periods differ");
    const double min_window = static_cast<double>(c.b.size()) * c.sample_period;
    if (window < min_window * (1.0 - 1e-12))
        throw std::invalid_argument("apply_predistortion: window shorter than the filter span");

    const Eigen::VectorXd f = convolve(x.samples, c.b).head(x.size());
    Eigen::VectorXd y = x.samples;
    bool faded = false;
    for (Eigen::Index n = 0; n < x.size(); ++n) {
        const double t = static_cast<double>(n) * x.sample_period;
        if (t < window * (1.0 - 1e-12)) {
            y[n] = f[n];
        } else if (!faded) {
            y[n] = 0.5 * (f[n] + x[n]);
            faded = true;
        } else {
            break;
        }
    }
    return {std::move(y), x.sample_period, x.t0};
}

LoopReport verify_loop(const DistortionChannel& channel, const FIRCoefficients& c, int samples, double window,
                       double settle_tol)
{
    if (samples < 2)
        throw std::invalid_argument("verify_loop: need at least 2 samples");
    const Waveform step(Eigen::VectorXd::Ones(samples), c.sample_period);
    const Waveform pre = apply_predistortion(step, c, window);
    Waveform y = apply_channel(channel, pre);
    y.samples.conservativeResize(samples);

    LoopReport r;
    const Eigen::VectorXd dev = (y.samples.array() - 1.0).abs();
    r.overshoot_n0 = y[0] - 1.0;
    r.max_plateau_ripple = dev.tail(samples - 1).maxCoeff();
    Eigen::Index k = samples;
    while (k > 0 && dev[k - 1] <= settle_tol)
        --k;
    r.settling_time = static_cast<double>(k) * c.sample_period;
    r.response = std::move(y);
    return r;
}

std::string fir_json(const FIRCoefficients& c)
{
    std::string out = "{\n  \"sample_period\": " + io::fmt(c.sample_period) + ",\n  \"b\": [";
    for (Eigen::Index k = 0; k < c.b.size(); ++k)
        out += (k ? ", " : "") + io::fmt(c.b[k]);
    out += "],\n  \"adjustments\": [";
    for (size_t k = 0; k < c.adjustments.size(); ++k)
        out += (k ? ", [" : "[") + std::to_string(c.adjustments[k].first) + ", " + io::fmt(c.adjustments[k].second)
            + "]";
    out += "]\n}\n";
    return out;
}

FIRCoefficients parse_fir_json(const std::string& text)
{
    const auto j = nlohmann::json::parse(text);
    for (const auto& [k, v] : j.items())
        if (k != "sample_period" && k != "b" && k != "adjustments")
            throw std::invalid_argument("fir json: unknown key '" + k + "'");
    FIRCoefficients c;
    c.sample_period = j.at("sample_period").get<double>();
    const auto b = j.at("b").get<std::vector<double>>();
    if (b.empty())
        throw std::invalid_argument("fir json: empty 'b'");
    c.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    if (j.contains("adjustments"))
        for (const auto& a : j.at("adjustments"))
            c.adjustments.emplace_back(a.at(0).get<int>(), a.at(1).get<double>());
    return c;
}

} // namespace cryo
