#include "cryo/noise.hpp"

#include "cryo/lsq.hpp"
#include "cryo/units.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>

namespace cryo {

void NoiseSpec::validate() const
{
    if (!(A_1Hz > 0.0))
        throw std::invalid_argument("NoiseSpec: A_1Hz must be > 0");
    if (!(f_low > 0.0) || !(f_high > f_low))
        throw std::invalid_argument("NoiseSpec: need 0 < f_low < f_high");
    if (!std::isfinite(beta))
        throw std::invalid_argument("NoiseSpec: non-finite beta");
}

double filter_g0(double omega, double t)
{
    const double x = 0.5 * omega * t;
    if (std::abs(x) < 1e-4)
        return 1.0 - x * x / 3.0;
    const double s = std::sin(x) / x;
    return s * s;
}

double detuning_sensitivity_sq(double eps, double t_c)
{
    const double d = eps * eps + t_c * t_c;
    return d == 0.0 ? 0.0 : eps * eps / d;
}

namespace {

// int_{f_low}^{f_high} g0(2 pi f t) f^-beta df on n log-spaced nodes; t in ns, f in Hz
double log_trapezoid(double t_ns, const NoiseSpec& spec, int n)
{
    const double u0 = std::log(spec.f_low), u1 = std::log(spec.f_high);
    const double du = (u1 - u0) / (n - 1);
    const double t_s = t_ns * 1e-9;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double f = std::exp(u0 + du * k);
        const double v = filter_g0(two_pi * f, t_s) * std::pow(f, 1.0 - spec.beta);
        sum += (k == 0 || k == n - 1) ? 0.5 * v : v;
    }
    return sum * du;
}

} // namespace

double chi0(double t, double eps, double t_c, const NoiseSpec& spec)
{
    spec.validate();
    const double sens = detuning_sensitivity_sq(eps, t_c);
    if (sens == 0.0 || t == 0.0)
        return 0.0;
    int n = 257;
    double prev = log_trapezoid(t, spec, n);
    double cur = prev;
    for (;;) {
        n = 2 * n - 1;
        cur = log_trapezoid(t, spec, n);
        if (std::abs(cur - prev) <= 1e-4 * std::abs(cur))
            break;
        if (n > (1 << 22))
            throw AccuracyError("chi0: quadrature did not converge at t = " + std::to_string(t) + " ns");
        prev = cur;
    }
    const double a = ueV_to_rad(spec.A_1Hz);
    // S(omega) d omega = (A^2 / f^beta) 2 pi df
    return t * t * sens * a * a * two_pi * cur;
}

CoherenceCurve coherence_chi0(const Eigen::VectorXd& tgrid, double eps, double t_c, const NoiseSpec& spec)
{
    spec.validate();
    for (Eigen::Index i = 0; i < tgrid.size(); ++i) {
        if (!(tgrid[i] >= 0.0) || (i > 0 && !(tgrid[i] > tgrid[i - 1])))
            throw std::invalid_argument("coherence_chi0: time grid must be nonnegative and increasing");
    }
    CoherenceCurve c;
    c.times = tgrid;
    c.coherence.resize(tgrid.size());
    for (Eigen::Index i = 0; i < tgrid.size(); ++i)
        c.coherence[i] = std::exp(-chi0(tgrid[i], eps, t_c, spec));
    return c;
}

KappaFit fit_kappa(const CoherenceCurve& curve)
{
    KappaFit r;
    const Eigen::Index n = curve.times.size();
    if (n == 0 || curve.coherence.size() != n)
        throw std::invalid_argument("fit_kappa: empty or mismatched curve");
    if (!(curve.coherence.minCoeff() < 0.9)) {
        r.ill_posed = true;
        return r;
    }
    // log-linearized start: -ln C = kappa t^2, weighted by C^2
    double num = 0.0, den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t2 = curve.times[i] * curve.times[i];
        const double c = curve.coherence[i];
        if (t2 <= 0.0 || !(c > 0.0))
            continue;
        const double w = c * c;
        num += w * t2 * -std::log(c);
        den += w * t2 * t2;
    }
    if (!(den > 0.0)) {
        r.ill_posed = true;
        return r;
    }
    const Eigen::ArrayXd t2 = curve.times.array().square();
    auto residual = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
        return (-p[0] * t2).exp().matrix() - curve.coherence;
    };
    Eigen::VectorXd p0(1);
    p0[0] = num / den;
    const auto fit = levenberg_marquardt<double>(residual, p0);
    r.kappa = fit.params[0];
    r.stderr_ = fit.stderr_of(0);
    r.ill_posed = !std::isfinite(r.kappa);
    return r;
}

std::vector<KappaFit> kappa_scan(const Eigen::VectorXd& eps_list, const Eigen::VectorXd& tgrid, double t_c,
                                 const NoiseSpec& spec, unsigned threads)
{
    std::vector<KappaFit> out(static_cast<size_t>(eps_list.size()));
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto work = [&] {
        for (Eigen::Index i = next++; i < eps_list.size(); i = next++) {
            try {
                out[static_cast<size_t>(i)] = fit_kappa(coherence_chi0(tgrid, eps_list[i], t_c, spec));
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!err)
                    err = std::current_exception();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(eps_list.size())));
    if (n == 1) {
        work();
        if (err)
            std::rethrow_exception(err);
        return out;
    }
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < n; ++k)
        pool.emplace_back(work);
    for (auto& t : pool)
        t.join();
    if (err)
        std::rethrow_exception(err);
    return out;
}

} // namespace cryo
