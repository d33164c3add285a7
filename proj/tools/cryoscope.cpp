#include "cryo/cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Cryogenic pulse-distortion calibration: DAPS simulation, filter design and analysis"};
    app.require_subcommand(1, 1);

    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;

    const std::vector<std::pair<std::string, std::string>> verbs{
        {"simulate-daps", "Simulate a DAPS amplitude x plateau map"},
        {"calibrate", "Fit peaks, reconstruct the step response and design a FIR"},
        {"verify-loop", "Run a closed-loop step test of a FIR"},
        {"chirp", "Sliding fit, spectrogram and Radon analysis of a trace"},
        {"noise-kappa", "1/f coherence curves and fitted decay rates"}};
    for (const auto& [name, help] : verbs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Random seed (overrides the config)");
        sub->add_option("--threads", threads, "Worker threads (overrides the config)")->check(CLI::Range(1u, 1024u));
    }

    CLI11_PARSE(app, argc, argv);
    const std::string verb = app.get_subcommands().front()->get_name();
    try {
        auto cfg = cryo::cli::load_config(config);
        if (seed)
            cfg.seed = *seed;
        if (threads)
            cfg.threads = *threads;
        for (const auto& p : cryo::cli::run_command(verb, cfg, out))
            std::cout << p.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "cryoscope " << verb << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
