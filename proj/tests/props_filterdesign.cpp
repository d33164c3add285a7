#include "props_common.hpp"

#include "cryo/filterdesign.hpp"
#include "cryo/waveform.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace cryo::props {

namespace {

constexpr double eps_mach = std::numeric_limits<double>::epsilon();

/// Cascade of one-pole stages; its sampled impulse response has a finite inverse.
DistortionChannel random_cascade(Rng& rng, double T)
{
    std::vector<DistortionChannel> stages;
    const int n = uniform_int(rng, 1, 3);
    for (int k = 0; k < n; ++k) {
        // a = exp(-T/tau) in [0.135, 0.82]
        stages.push_back(DistortionChannel::one_pole(T / uniform(rng, 0.2, 2.0)));
    }
    return DistortionChannel::compose(std::move(stages));
}

Eigen::VectorXd sampled_impulse(const DistortionChannel& c, double T, Eigen::Index n)
{
    return apply_channel(c, Waveform(Eigen::VectorXd::Unit(n, 0), T)).samples.head(n);
}

} // namespace

Results filterdesign_properties(std::uint64_t seed, int cases)
{
    Results out;
    const std::string mod = "filterdesign";

    out.push_back(run_property(mod, "exact deconvolution on the leading block", seed, cases,
                               [](Rng& rng, int) -> Outcome {
        const int len = uniform_int(rng, 2, 40);
        Eigen::VectorXd h = random_vector(rng, uniform_int(rng, 2, 60));
        // h[0] dominant: the tail's l1 norm stays below |h[0]|
        const double s = uniform(rng, 0.1, 0.9) / h.tail(h.size() - 1).cwiseAbs().sum();
        h.tail(h.size() - 1) *= s;
        h[0] = (uniform_int(rng, 0, 1) ? 1.0 : -1.0) * log_uniform(rng, 0.1, 10.0);
        const Inversion inv = invert_to_fir(Waveform(h, 1.0), len);
        const Eigen::VectorXd full = convolve(inv.fir.b, h);
        Eigen::VectorXd r = full.head(len);
        r[0] -= 1.0;
        Eigen::MatrixXd H = conv_matrix(h, len).topRows(len);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(H).singularValues();
        const double cond = sv[0] / sv[sv.size() - 1];
        const double err = r.cwiseAbs().maxCoeff();
        if (err > 10.0 * eps_mach * cond)
            return msg("residual ", err, " > 10 eps cond = ", 10.0 * eps_mach * cond);
        if (std::abs(inv.max_residual - err) > eps_mach)
            return msg("reported residual ", inv.max_residual, " vs recomputed ", err);
        return {};
    }));

    out.push_back(run_property(mod, "DC preservation", seed, cases, [](Rng& rng, int) -> Outcome {
        const double T = log_uniform(rng, 0.1, 2.0);
        const DistortionChannel c = random_cascade(rng, T);
        const Eigen::VectorXd h = sampled_impulse(c, T, 400);
        // the smallest length holding 99.9 % of the energy of a long inverse, plus slack
        const Eigen::VectorXd g = causal_inverse(h, 200);
        const double total = g.squaredNorm();
        int cover = 0;
        double acc = 0.0;
        while (acc < 0.999 * total)
            acc += g[cover] * g[cover], ++cover;
        const int len = cover + uniform_int(rng, 0, 20);
        const Inversion inv = invert_to_fir(Waveform(h, T), len);
        const double dc = inv.fir.b.sum() * h.sum();
        if (std::abs(dc - 1.0) > 1e-6)
            return msg("sum(h_inv) sum(h) = ", dc, " with fir_len ", len);
        return {};
    }));

    out.push_back(run_property(mod, "adjust_overshoot keeps other taps and is reversible", seed, cases,
                               [](Rng& rng, int) -> Outcome {
        FIRCoefficients f;
        f.b = random_vector(rng, uniform_int(rng, 1, 40));
        f.sample_period = log_uniform(rng, 0.1, 2.0);
        std::vector<std::pair<int, double>> adj;
        const int k = uniform_int(rng, 1, 5);
        for (int i = 0; i < k; ++i)
            adj.emplace_back(uniform_int(rng, 0, static_cast<int>(f.b.size()) - 1), uniform(rng, -0.5, 0.5));
        const FIRCoefficients a = adjust_overshoot(f, adj);
        std::vector<bool> listed(static_cast<size_t>(f.b.size()), false);
        for (const auto& [i, d] : adj)
            listed[static_cast<size_t>(i)] = true;
        for (Eigen::Index i = 0; i < f.b.size(); ++i)
            if (!listed[static_cast<size_t>(i)] && a.b[i] != f.b[i])
                return msg("unlisted tap ", i, " changed");
        std::vector<std::pair<int, double>> undo;
        for (const auto& [i, d] : adj)
            undo.emplace_back(i, -d);
        const FIRCoefficients back = adjust_overshoot(a, undo);
        for (Eigen::Index i = 0; i < f.b.size(); ++i) {
            double dsum = 0.0;
            for (const auto& [j, d] : adj)
                if (j == i)
                    dsum += std::abs(d);
            const double tol = 2.0 * static_cast<double>(2 * k) * eps_mach * (std::abs(f.b[i]) + dsum);
            if (std::abs(back.b[i] - f.b[i]) > tol)
                return msg("tap ", i, " restored to ", back.b[i], " from ", f.b[i]);
            if (!listed[static_cast<size_t>(i)] && back.b[i] != f.b[i])
                return msg("unlisted tap ", i, " changed after undo");
        }
        if (back.adjustments.size() != 2 * adj.size())
            return msg("history holds ", back.adjustments.size(), " entries");
        return {};
    }));

    out.push_back(run_property(mod, "one-pole closed loop settles within 1e-3 from the second sample", seed, cases,
                               [](Rng& rng, int) -> Outcome {
        const double T = log_uniform(rng, 0.1, 2.0);
        const double tau = T / uniform(rng, 0.05, 2.0);
        const DistortionChannel c = DistortionChannel::one_pole(tau);
        const int len = uniform_int(rng, 2, 30);
        const Inversion inv = invert_to_fir(Waveform(sampled_impulse(c, T, 200), T), len);
        const LoopReport rep = verify_loop(c, inv.fir, uniform_int(rng, 10, 120));
        if (rep.max_plateau_ripple > 1e-3)
            return msg("ripple ", rep.max_plateau_ripple, " (tau ", tau, ", T ", T, ", fir_len ", len, ")");
        return {};
    }));
    return out;
}

} // namespace cryo::props
