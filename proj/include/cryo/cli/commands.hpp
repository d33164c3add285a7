#pragma once

#include "cryo/cli/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace cryo::cli {

struct CommandError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Written = std::vector<std::filesystem::path>;

/// DAPS map CSV (plateau rows, amplitude columns in GHz) plus metadata JSON.
Written cmd_simulate_daps(const RunConfig& cfg, const std::filesystem::path& out);
/// Peak track, step response, impulse, FIR and a residual report from a stored map.
Written cmd_calibrate(const RunConfig& cfg, const std::filesystem::path& out);
/// Closed-loop step test of a stored FIR against the configured channel.
Written cmd_verify_loop(const RunConfig& cfg, const std::filesystem::path& out);
/// Sliding fit, spectrogram, Radon map and peak angle of a trace.
Written cmd_chirp(const RunConfig& cfg, const std::filesystem::path& out);
/// Coherence curves and fitted Gaussian decay rates across detunings.
Written cmd_noise_kappa(const RunConfig& cfg, const std::filesystem::path& out);

/// Reads a map written by cmd_simulate_daps (amplitudes converted back to rad/ns).
DAPSMap load_daps_map_csv(const std::filesystem::path& p);

/// Dispatches one of simulate-daps, calibrate, verify-loop, chirp, noise-kappa.
Written run_command(const std::string& verb, const RunConfig& cfg, const std::filesystem::path& out);

const std::vector<std::string>& command_names();

} // namespace cryo::cli
