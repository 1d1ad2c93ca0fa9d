// Experiment driver: solves the truncated chaos system and writes CSV
// reports. See README.md for the config format and output schemas.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "chaospde/chaospde.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    int threads = 0;
};

chaospde::ExperimentConfig load(const CommonArgs& args) {
    chaospde::ExperimentConfig cfg =
        args.config_path.empty() ? chaospde::ExperimentConfig{} : chaospde::load_config(args.config_path);
    if (!args.out_override.empty()) cfg.out = args.out_override;
    if (args.seed_set) cfg.seed = args.seed_override;
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file (key = value lines)");
    cmd->add_option("--out", args.out_override, "output CSV path (overrides the config)");
    cmd->add_option("--seed", args.seed_override, "RNG seed (overrides the config)")
        ->each([&args](const std::string&) { args.seed_set = true; });
    cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Truncated Wiener chaos solver for bilinear evolution equations driven by colored noise"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string axis = "n";

    CLI::App* validate = app.add_subcommand("validate-basis", "basis and noise invariant battery");
    add_common(validate, args);
    CLI::App* moments = app.add_subcommand("moments", "second moments per time node");
    add_common(moments, args);
    CLI::App* sample = app.add_subcommand("sample", "realization dump with summary statistics");
    add_common(sample, args);
    CLI::App* sweep = app.add_subcommand("sweep", "truncation sweep with measured tails and bounds");
    add_common(sweep, args);
    sweep->add_option("--axis", axis, "sweep axis: N, n, r, or tau")->required();
    CLI::App* multistep = app.add_subcommand("multistep", "step-by-step approximation over a uniform partition");
    add_common(multistep, args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        chaospde::ExperimentConfig cfg = load(args);
        int threads = args.threads;
        if (validate->parsed()) chaospde::cli::cmd_validate_basis(cfg, threads);
        if (moments->parsed()) chaospde::cli::cmd_moments(cfg, threads);
        if (sample->parsed()) chaospde::cli::cmd_sample(cfg, threads);
        if (sweep->parsed()) chaospde::cli::cmd_sweep(cfg, axis, threads);
        if (multistep->parsed()) chaospde::cli::cmd_multistep(cfg, threads);
        CHAOSPDE_LOG_INFO("wrote %s", cfg.out.c_str());
        return 0;
    } catch (const chaospde::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const chaospde::GuardError& e) {
        std::cerr << "numerical guard: " << e.what() << "\n";
        return 3;
    } catch (const chaospde::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
