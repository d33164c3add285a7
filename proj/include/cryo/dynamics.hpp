#pragma once

#include "cryo/waveform.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace cryo {

struct SingularRegimeError : std::domain_error {
    using std::domain_error::domain_error;
};

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Two-level charge system, all in rad/ns. The levels cross at applied detuning eps0.
struct TwoLevelParams {
    double eps0 = 0.0;
    double t_c = 0.0;
    double kappa = 0.0;

    static TwoLevelParams from_ghz(double eps0_ghz, double t_c_ghz, double kappa_ghz);
    /// Throws std::invalid_argument unless t_c >= 0 and kappa > 0.
    void validate() const;
    /// The asymptotic rate formulas assume kappa >> t_c.
    bool asymptotic_warning() const { return kappa < 3.0 * t_c; }
};

/// Bloch vector with w = 2 p_e, so w = 0 is the diabatic ground state and the
/// fully dephased mixture sits at w = 1.
struct BlochState {
    double u = 0.0;
    double v = 0.0;
    double w = 0.0;
};

/// Ground state of H = (x sz + t_c sx)/2 at Hamiltonian detuning x = eps - eps0.
BlochState ground_state(double x, double t_c);

struct DynamicsResult {
    std::vector<double> times;
    std::vector<BlochState> states;
    double final_w = 0.0;
};

/// Optical Bloch equations under pure dephasing with the applied detuning
/// `detuning` (rad/ns, linearly interpolated between samples):
///   u' = -k u + x v,  v' = -x u - k v - t_c (w - 1),  w' = t_c v,  x = eps(t) - eps0.
/// States are reported on the detuning sample grid.
DynamicsResult integrate_lindblad(const TwoLevelParams& p, const Waveform& detuning,
                                  const BlochState& init, double rel_tol = 1e-8);

/// Same integration without storing the trajectory.
double lindblad_final_w(const TwoLevelParams& p, const Waveform& detuning, const BlochState& init,
                        double rel_tol = 1e-8);

/// Instantaneous -w'/(w - 1) of a state.
double numerical_rate(const BlochState& s, double t_c);

/// kappa t_c^2 / (kappa^2 + (eps - eps0)^2)
double gamma_steady(double eps, const TwoLevelParams& p);

/// t_c^2 (kappa D + x eps_dot) / (D (D - t_c^2)), x = eps - eps0, D = x^2 + kappa^2.
/// Throws SingularRegimeError when D <= t_c^2.
double gamma_first_order(double eps, double eps_dot, const TwoLevelParams& p);

/// First-order adiabatic-elimination rate carried out consistently in 1/D:
///   t_c^2 (kappa D^2 - eps_dot x (x^2 - 3 kappa^2)) / (D (D^2 + t_c^2 (x^2 - kappa^2))).
/// Diagnostic companion of gamma_first_order; see README.
double gamma_first_order_consistent(double eps, double eps_dot, const TwoLevelParams& p);

enum class RateModel { steady, first_order, first_order_consistent };

/// 1 - exp(-integral of Gamma(eps(t)) dt) over the whole waveform (trapezoid rule,
/// eps_dot by central differences).
double relaxation_signal(const Waveform& detuning, const TwoLevelParams& p, RateModel model);

using StepFunction = std::function<double(double)>;

/// w(t) = 1 - exp(-int_0^{eps_amp s(t)} Gamma(e)/eps_dot(s^-1(e/eps_amp)) de), evaluated
/// after substituting e = eps_amp s(tau), i.e. as int_0^t Gamma(eps_amp s(tau)) dtau.
/// Throws PreconditionError if s decreases on [0, t].
double daps_signal_integral(double t, double eps_amp, const StepFunction& s, const TwoLevelParams& p);

/// 1 - exp(-pi t_c^2 / eps_dot(t')) with t' the first time eps_amp s(t') reaches eps0,
/// or 0 when that happens after t (or never).
double daps_signal_delta(double t, double eps_amp, const StepFunction& s, const TwoLevelParams& p);

} // namespace cryo
