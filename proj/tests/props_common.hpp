#pragma once

#include "properties.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

namespace cryo::props {

using Rng = std::mt19937_64;

/// A case returns nothing on success or a description of the violation.
using Outcome = std::optional<std::string>;
using CaseFn = std::function<Outcome(Rng&, int)>;

inline std::uint64_t mix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t name_hash(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s)
        h = (h ^ c) * 1099511628211ULL;
    return h;
}

/// Runs `cases` independent cases, each with its own generator derived from
/// (seed, module, name, index) so a failing case can be replayed alone.
inline PropertyResult run_property(const std::string& module, const std::string& name, std::uint64_t seed, int cases,
                                   const CaseFn& fn)
{
    PropertyResult r{module, name, 0, 0, {}, 0.0};
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t base = mix(seed ^ name_hash(module + "/" + name));
    for (int i = 0; i < cases; ++i) {
        Rng rng(mix(base + static_cast<std::uint64_t>(i)));
        Outcome bad;
        try {
            bad = fn(rng, i);
        } catch (const std::exception& e) {
            bad = std::string("exception: ") + e.what();
        }
        ++r.cases;
        if (bad) {
            if (r.failures == 0)
                r.first_failure = "case " + std::to_string(i) + ": " + *bad;
            ++r.failures;
        }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline double uniform(Rng& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

inline int uniform_int(Rng& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

inline double log_uniform(Rng& rng, double a, double b) { return std::exp(uniform(rng, std::log(a), std::log(b))); }

inline Eigen::VectorXd random_vector(Rng& rng, Eigen::Index n, double scale = 1.0)
{
    std::normal_distribution<double> g(0.0, scale);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v[i] = g(rng);
    return v;
}

/// Stream-formatted message, for failure descriptions.
template <typename... Ts>
std::string msg(const Ts&... parts)
{
    std::ostringstream os;
    os.precision(6);
    (os << ... << parts);
    return os.str();
}

} // namespace cryo::props
