#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cryo {

struct LsqOptions {
    int max_iterations = 200;
    double x_tol = 1e-12;
    double f_tol = 1e-15;
    double lambda0 = 1e-3;
};

template <typename Scalar>
struct LsqResult {
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    Vec params;
    Mat covariance; // s^2 (J^T J)^-1 with s^2 = rss / (m - n)
    Scalar rss = 0;
    int iterations = 0;
    bool converged = false;

    Scalar stderr_of(Eigen::Index i) const { return std::sqrt(std::max(covariance(i, i), Scalar(0))); }
};

/// Central-difference Jacobian of residual(p).
template <typename Scalar, typename Residual>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
numeric_jacobian(Residual& residual, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& p)
{
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Scalar base = std::cbrt(std::numeric_limits<Scalar>::epsilon());
    Vec q = p;
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> J;
    for (Eigen::Index k = 0; k < p.size(); ++k) {
        const Scalar h = base * std::max(std::abs(p[k]), Scalar(1e-3));
        q[k] = p[k] + h;
        const Vec rp = residual(q);
        q[k] = p[k] - h;
        const Vec rm = residual(q);
        q[k] = p[k];
        if (k == 0)
            J.resize(rp.size(), p.size());
        J.col(k) = (rp - rm) / (Scalar(2) * h);
    }
    return J;
}

/// Levenberg-Marquardt with Marquardt diagonal scaling. `residual(p)` returns
/// model - data; the Jacobian is taken by central differences.
template <typename Scalar, typename Residual>
LsqResult<Scalar> levenberg_marquardt(Residual residual, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> p,
                                      const LsqOptions& opt = {})
{
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    LsqResult<Scalar> res;
    const Eigen::Index n = p.size();

    Vec r = residual(p);
    Scalar rss = r.squaredNorm();
    Scalar lambda = opt.lambda0;
    Mat J = numeric_jacobian<Scalar>(residual, p);
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (!std::isfinite(rss))
            break;
        const Mat A = J.transpose() * J;
        const Vec g = J.transpose() * r;
        Vec d = A.diagonal();
        const Scalar dmax = d.maxCoeff();
        for (Eigen::Index k = 0; k < n; ++k)
            d[k] = std::max(d[k], dmax * Scalar(1e-12) + std::numeric_limits<Scalar>::min());

        bool accepted = false;
        while (lambda < Scalar(1e16)) {
            Mat M = A;
            M.diagonal() += lambda * d;
            const Vec step = -M.ldlt().solve(g);
            const Vec p_new = p + step;
            const Vec r_new = residual(p_new);
            const Scalar rss_new = r_new.squaredNorm();
            if (std::isfinite(rss_new) && rss_new <= rss) {
                const bool small_step = step.norm() <= opt.x_tol * (p.norm() + opt.x_tol);
                const bool small_gain = rss - rss_new <= opt.f_tol * rss;
                p = p_new;
                r = r_new;
                rss = rss_new;
                lambda = std::max(lambda * Scalar(0.3), Scalar(1e-15));
                accepted = true;
                if (small_step || small_gain || rss == Scalar(0)) {
                    res.converged = true;
                }
                break;
            }
            lambda *= Scalar(4);
        }
        if (!accepted) {
            // no descent possible: at a minimum within numerical precision
            res.converged = g.norm() <= Scalar(1e-8) * (Scalar(1) + std::sqrt(rss)) * (Scalar(1) + J.norm());
            break;
        }
        J = numeric_jacobian<Scalar>(residual, p);
        if (res.converged)
            break;
    }
    res.iterations = it;
    res.params = p;
    res.rss = rss;
    const Eigen::Index m = r.size();
    const Scalar s2 = m > n ? rss / Scalar(m - n) : Scalar(0);
    const Mat A = J.transpose() * J;
    Eigen::FullPivLU<Mat> lu(A);
    if (lu.isInvertible())
        res.covariance = s2 * lu.inverse();
    else
        res.covariance = Mat::Constant(n, n, std::numeric_limits<Scalar>::infinity());
    return res;
}

} // namespace cryo
