#pragma once

#include "cryo/chirp.hpp"
#include "cryo/daps.hpp"
#include "cryo/filterdesign.hpp"
#include "cryo/noise.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cryo::cli {

inline constexpr int schema_version = 1;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SweepSection {
    Eigen::VectorXd amplitudes; // rad/ns
    Eigen::VectorXd plateaus;   // ns
    SweepOptions options;
};

struct CalibrateSection {
    std::filesystem::path map;
    double ref_time = 20.0;
    int fir_len = 20;
    InvertOptions invert;
    std::vector<std::pair<int, double>> adjustments;
    int loop_samples = 60;
    double window = std::numeric_limits<double>::infinity();
};

struct VerifySection {
    std::filesystem::path fir;
    int samples = 60;
    double window = std::numeric_limits<double>::infinity();
};

struct ChirpSection {
    std::optional<std::filesystem::path> trace;
    std::optional<ChirpSignalParams> synth;
    double duration = 100.0;
    double sample_period = 1.0;
    ChirpAnalysisOptions analysis;
};

struct NoiseSection {
    NoiseSpec spec;
    double t_c = 0.0;         // rad/ns
    Eigen::VectorXd eps;      // rad/ns
    Eigen::VectorXd times;    // ns
};

/// Parsed configuration. Every key is checked; unknown keys are errors.
struct RunConfig {
    nlohmann::ordered_json source;
    std::filesystem::path base_dir;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::optional<DistortionChannel> channel;
    std::vector<WeightedParams> systems;
    std::optional<SweepSection> sweep;
    FitOptions fit;
    std::optional<CalibrateSection> calibrate;
    std::optional<VerifySection> verify;
    std::optional<ChirpSection> chirp;
    std::optional<NoiseSection> noise;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

DistortionChannel parse_channel(const nlohmann::json& j, const std::string& where,
                                const std::filesystem::path& base_dir);

} // namespace cryo::cli
