#pragma once

#include "cryo/waveform.hpp"

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cryo {

struct NonInvertibleError : std::domain_error {
    using std::domain_error::domain_error;
};

struct FIRCoefficients {
    Eigen::VectorXd b;
    double sample_period = 1.0;
    std::vector<std::pair<int, double>> adjustments;

    static FIRCoefficients delta(double sample_period = 1.0);
};

/// (M + N) x M Toeplitz realization of h (length N + 1): entry (i, j) = h[i - j].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
conv_matrix(const Eigen::MatrixBase<Derived>& h, Eigen::Index input_len)
{
    using Mat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index n = h.size();
    Mat H = Mat::Zero(input_len + n - 1, input_len);
    for (Eigen::Index j = 0; j < input_len; ++j)
        H.col(j).segment(j, n) = h;
    return H;
}

/// First `len` taps of the causal inverse g with (g * h)[n] = delta[n], by forward
/// substitution on the leading lower-triangular block.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
causal_inverse(const Eigen::MatrixBase<Derived>& h, Eigen::Index len)
{
    using Scalar = typename Derived::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> g(len);
    for (Eigen::Index n = 0; n < len; ++n) {
        Scalar acc = n == 0 ? Scalar(1) : Scalar(0);
        const Eigen::Index kmax = std::min<Eigen::Index>(n, h.size() - 1);
        for (Eigen::Index k = 1; k <= kmax; ++k)
            acc -= h(k) * g(n - k);
        g(n) = acc / h(0);
    }
    return g;
}

Eigen::MatrixXd build_conv_matrix(const Waveform& h, Eigen::Index input_len);

struct InvertOptions {
    enum class Method { exact, least_squares };
    Method method = Method::exact;
    /// Tikhonov weight for the least-squares path.
    double lambda = 0.0;
    /// If set, trailing taps with |h| below floor * max|h| are zeroed before inversion.
    std::optional<double> noise_floor;
};

struct Inversion {
    FIRCoefficients fir;
    Eigen::VectorXd residual; // h_inv * h - delta, full length
    double max_residual = 0.0; // over the first fir_len samples
};

/// h holds dimensionless taps on h.sample_period.
Inversion invert_to_fir(const Waveform& h, int fir_len, const InvertOptions& opt = {});

/// b'[index] = b[index] + delta for each entry; history appended.
FIRCoefficients adjust_overshoot(const FIRCoefficients& c, const std::vector<std::pair<int, double>>& adjustments);

/// Filtered signal for t - x.t0 < window, the mean of filtered and raw on the first
/// sample at or past the window, raw input afterwards. Output length = input length.
Waveform apply_predistortion(const Waveform& x, const FIRCoefficients& c,
                             double window = 20.0);

struct LoopReport {
    double max_plateau_ripple = 0.0; // max |y/A - 1| for n >= 1
    double settling_time = 0.0;      // T_s * first index after which |y/A - 1| <= tol
    double overshoot_n0 = 0.0;       // y[0]/A - 1
    Waveform response;
};

/// Drives a unit step of `samples` samples through pre-distortion and the channel.
LoopReport verify_loop(const DistortionChannel& channel, const FIRCoefficients& c, int samples = 60,
                       double window = std::numeric_limits<double>::infinity(), double settle_tol = 0.01);

std::string fir_json(const FIRCoefficients& c);
FIRCoefficients parse_fir_json(const std::string& text);

} // namespace cryo
