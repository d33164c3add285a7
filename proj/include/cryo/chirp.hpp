#pragma once

#include "cryo/waveform.hpp"

#include <string>
#include <vector>

namespace cryo {

/// s(t) = [A1 sin(2 pi B1 t + 2 pi C^2 t^2) + A2 sin(2 pi B2 t)] exp(-t^2/t0^2) + D
/// with B1, B2, C in MHz and t in ns (phases carry 1e-3 and 1e-6 factors).
struct ChirpSignalParams {
    double A1 = 0.0;
    double A2 = 0.0;
    double B1 = 0.0;
    double B2 = 0.0;
    double C = 0.0;
    double D = 0.0;
    double t0 = 1.0;

    void validate() const;
    static ChirpSignalParams table_chirped();
    static ChirpSignalParams table_unchirped();
    /// Instantaneous frequency slope of the first tone, MHz/ns: 2 C^2 * 1e-3.
    double chirp_slope_mhz_per_ns() const { return 2.0 * C * C * 1e-3; }
};

Waveform synth_exchange_signal(const ChirpSignalParams& p, const Eigen::VectorXd& tgrid);
Waveform synth_exchange_signal(const ChirpSignalParams& p, double duration, double sample_period);

struct WindowFit {
    double t_start = 0.0;
    double omega = 0.0;   // rad/ns
    double stderr_ = 0.0; // rad/ns
    bool valid = false;
    std::string note;
};

/// Fits A cos(Omega (t - t0)) + B on [t_start, t_start + window_T] for t_start = n * step.
std::vector<WindowFit> sliding_window_fit(const Waveform& trace, double window_T = 10.0, double step = 1.0);

/// Slope of Omega/2pi (MHz) against window centre (ns): least squares over valid windows,
/// weighted by 1/stderr^2 so that windows the single-tone fit cannot resolve count little.
double sliding_fit_slope_mhz_per_ns(const std::vector<WindowFit>& fits, double window_T);

enum class WindowFn { hann, rect, gauss };
std::string to_string(WindowFn w);
WindowFn window_fn_from_string(const std::string& s);
Eigen::VectorXd window_samples(WindowFn w, Eigen::Index n);

struct StftOptions {
    int pad = 4;
    /// Subtract each frame's mean before windowing.
    bool detrend_frames = false;
    /// Scale each frame's magnitude column to a maximum of 1.
    bool normalize_frames = false;
};

struct Spectrogram {
    Eigen::VectorXd times; // frame centres, ns
    Eigen::VectorXd freqs; // MHz, 0 .. Nyquist
    Eigen::MatrixXd magnitude; // rows: freqs, cols: times
    WindowFn window = WindowFn::hann;
    double window_len = 0.0;
    double hop = 0.0;
    int hop_samples = 1;
    int nfft = 0;
    double window_energy = 0.0; // sum of squared window samples
    StftOptions options;
};

Spectrogram stft(const Waveform& trace, double window_len, double hop, WindowFn fn, const StftOptions& opt = {});

/// Overlap-corrected one-sided energy of a raw (not normalized) spectrogram.
double spectrogram_energy(const Spectrogram& s);

struct RadonMap {
    Eigen::VectorXd angles;  // degrees
    Eigen::VectorXd offsets; // pixels of the N x N normalized image
    Eigen::MatrixXd response; // rows: angles, cols: offsets
    std::string normalization;
};

/// Projections of an image (rows: y, cols: x) at each angle; the line at angle theta
/// and offset p is {centre + p (cos, -sin) + s (sin, cos)}, sampled bilinearly on a
/// unit grid. theta = 0 gives column sums, theta = 90 row sums.
RadonMap radon_image(const Eigen::MatrixXd& image, const Eigen::VectorXd& angles_deg);

/// Radon transform of the spectrogram magnitude after min-max scaling of both axes
/// onto a common square grid.
RadonMap radon(const Spectrogram& spec, const Eigen::VectorXd& angles_deg);

/// Angle of the largest response; ties go to the angle closest to 90.
double radon_peak_angle(const RadonMap& map);

struct ChirpAnalysisOptions {
    WindowFn window = WindowFn::hann;
    double window_len = 25.0;
    double hop = 1.0;
    StftOptions stft{4, true, true};
    double angle_step = 1.0;
    bool remove_mean = true;
    double fit_window = 10.0;
    double fit_step = 1.0;
};

struct ChirpAnalysis {
    Spectrogram spectrogram;
    RadonMap radon;
    double peak_angle = 0.0;
    std::vector<WindowFit> fits;
    double slope_mhz_per_ns = 0.0;
};

ChirpAnalysis analyze_chirp(const Waveform& trace, const ChirpAnalysisOptions& opt = {});

} // namespace cryo
