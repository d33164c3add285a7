#pragma once

#include "cryo/dynamics.hpp"
#include "cryo/waveform.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cryo {

enum class DapsMode { ode, integral, delta };

std::string to_string(DapsMode m);
DapsMode daps_mode_from_string(const std::string& s);

/// How a sweep cell's pulse is built: a unit trapezoid programmed at awg_period,
/// held (zero-order) onto sim_period, then sent through the channel.
struct PulseConfig {
    double ramp_time = 0.0;
    double awg_period = 1.0;
    double sim_period = 0.002;
    double pre_pad = 1.0;
    double post_pad = 10.0;
};

struct WeightedParams {
    TwoLevelParams params;
    double weight = 1.0;
};

struct SweepOptions {
    PulseConfig pulse;
    DapsMode mode = DapsMode::ode;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
    double rel_tol = 1e-7;
    bool subtract_baseline = false;
    unsigned threads = 1;
};

struct DAPSMap {
    Eigen::VectorXd amplitudes; // rad/ns
    Eigen::VectorXd times;      // plateau times, ns
    Eigen::MatrixXd signal;     // rows: times, cols: amplitudes

    struct Meta {
        std::string channel;
        DapsMode mode = DapsMode::ode;
        std::vector<WeightedParams> params;
        PulseConfig pulse;
        double noise_sigma = 0.0;
        std::uint64_t seed = 0;
        bool baseline_subtracted = false;
    } meta;

    void validate() const;
};

struct SweepError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Unit pulse after the channel, on the sim grid (starts at t = 0, pre_pad included).
Waveform distorted_pulse(const DistortionChannel& c, const PulseConfig& pulse, double plateau);

/// Continuous step function of the channel for the rising part of the pulse,
/// s(0) = 0, linear between sim samples; sample n is placed at (n + 1) * sim_period.
StepFunction distorted_step(const DistortionChannel& c, const PulseConfig& pulse, double horizon);

/// Amplitude at which the distorted pulse maximum reaches eps0.
double critical_amplitude(const DistortionChannel& c, const PulseConfig& pulse, double plateau,
                          const TwoLevelParams& p);

DAPSMap run_daps_sweep(const DistortionChannel& c, const std::vector<WeightedParams>& params,
                       const Eigen::VectorXd& amp_grid, const Eigen::VectorXd& time_grid,
                       const SweepOptions& opt);
DAPSMap run_daps_sweep(const DistortionChannel& c, const TwoLevelParams& params, const Eigen::VectorXd& amp_grid,
                       const Eigen::VectorXd& time_grid, const SweepOptions& opt);

/// Element-wise mean of maps on identical grids.
DAPSMap average_maps(const std::vector<DAPSMap>& maps);

// Lorentzian peaks: b + H g^2 / ((x - c)^2 + g^2), FWHM = 2 g.

struct Lorentzian {
    double height = 0.0;
    double center = 0.0;
    double gamma = 0.0;
    double center_err = 0.0;
    double height_err = 0.0;
    double gamma_err = 0.0;
};

struct PeakFit {
    bool ok = false;
    double baseline = 0.0;
    std::vector<Lorentzian> peaks; // sorted by center
    double rss = 0.0;
    std::string reason;
};

struct FitOptions {
    enum class Model { single, double_peak };
    enum class Side { left, right };

    Model model = Model::single;
    /// Which peak of a double fit the track follows; required for the double model.
    std::optional<Side> side;
    /// > 0: fit only the contiguous region around the maximum where the
    /// median-filtered row exceeds this fraction of its peak value.
    double local_fraction = 0.0;
    int min_half_points = 3;
    int max_restarts = 5;
    std::uint64_t seed = 0;
};

PeakFit fit_lorentzian_row(const Eigen::VectorXd& x, const Eigen::VectorXd& y, const FitOptions& opt,
                           std::uint64_t row_seed = 0);

struct PeakTrack {
    Eigen::VectorXd times;
    Eigen::VectorXd eps_max;
    Eigen::VectorXd stderr_;
    Eigen::VectorXd height;
    Eigen::VectorXd fwhm;
    std::vector<bool> defined;
    std::vector<std::string> notes;
    FitOptions::Model model = FitOptions::Model::single;
};

PeakTrack fit_peaks(const DAPSMap& map, const FitOptions& opt = {});

struct StepResponseEstimate {
    Eigen::VectorXd times;
    Eigen::VectorXd s;
    Eigen::VectorXd stderr_;
    std::vector<bool> defined;
    double ref_time = 20.0;
    double eps0_est = 0.0;
    /// False when some point drops below its predecessor by more than their combined stderr.
    bool monotone = true;

    /// Requires a uniform time grid and every point defined.
    Waveform waveform() const;
};

StepResponseEstimate reconstruct_step(const PeakTrack& track, double ref_time = 20.0);

struct Visibility {
    bool defined = false;
    double value = 0.0;
    double height = 0.0;
    double fwhm = 0.0;
};

/// Fitted peak height over fitted FWHM of one map row.
Visibility visibility(const Eigen::VectorXd& amplitudes, const Eigen::VectorXd& row);

/// pi^2 kappa / (4 t_c^3)
double optimal_plateau_estimate(const TwoLevelParams& p);

/// Amplitude of the largest signal (parabolic refinement) minus the critical amplitude,
/// for a single-plateau map.
double overshoot_factor(const DAPSMap& map, const DistortionChannel& c, const TwoLevelParams& p);

} // namespace cryo
