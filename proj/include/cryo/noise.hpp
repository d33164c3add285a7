#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace cryo {

struct AccuracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// S(f) = A_1Hz^2 / f^beta with A_1Hz in ueV; cutoffs in Hz.
struct NoiseSpec {
    double A_1Hz = 1.0;
    double beta = 1.0;
    double f_low = 1.0;
    double f_high = 100e9;

    void validate() const;
};

struct CoherenceCurve {
    Eigen::VectorXd times;     // ns
    Eigen::VectorXd coherence; // exp(-chi0)
};

/// (sin(w t / 2) / (w t / 2))^2
double filter_g0(double omega, double t);

/// (d omega_q / d eps)^2 = eps^2 / (eps^2 + t_c^2) for omega_q = sqrt(eps^2 + t_c^2).
double detuning_sensitivity_sq(double eps, double t_c);

/// chi0(t) = t^2 (d omega_q/d eps)^2 * int g0(omega, t) S(omega) d omega with omega = 2 pi f,
/// S in (rad/ns)^2 per Hz, integrated on a log-spaced trapezoid between the cutoffs.
/// Throws AccuracyError if node doubling does not settle to 1e-4 relative change.
double chi0(double t, double eps, double t_c, const NoiseSpec& spec);

CoherenceCurve coherence_chi0(const Eigen::VectorXd& tgrid, double eps, double t_c, const NoiseSpec& spec);

struct KappaFit {
    bool ill_posed = false;
    double kappa = 0.0; // ns^-2
    double stderr_ = 0.0;
};

/// Least squares of exp(-kappa t^2); ill-posed when the curve never drops below 0.9.
KappaFit fit_kappa(const CoherenceCurve& curve);

/// fit_kappa(coherence_chi0(...)) for each detuning, spread over `threads`.
std::vector<KappaFit> kappa_scan(const Eigen::VectorXd& eps_list, const Eigen::VectorXd& tgrid, double t_c,
                                 const NoiseSpec& spec, unsigned threads = 1);

} // namespace cryo
