// mfcd: mean-field counter-diabatic annealing experiments.
//
//   mfcd <bloch|fidelity-batch|success-curve|export-schedule|verify>
//        [--config PATH] [--out DIR] [--workers N] [--seed-override SEED]

#include <iostream>

#include <CLI11.hpp>

#include "mfcd/cli.hpp"

int main(int argc, char** argv) {
    using namespace mfcd::cli;

    CLI::App app{"Mean-field counter-diabatic quantum annealing experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int workers = 0;
    std::uint64_t seed_override = 0;
    bool debug_corrupt = false;

    struct Entry {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&, std::ostream&);
    };
    const Entry entries[] = {
        {"bloch", "Mean-field trajectories with and without CD, plus fixed-point snapshots", cmd_bloch},
        {"fidelity-batch", "Final ground-state fidelity with and without CD over J and h seeds", cmd_fidelity_batch},
        {"success-curve", "Sampled success probability vs annealing time, MFCD vs linear", cmd_success_curve},
        {"export-schedule", "Compile the MFCD drive into hardware A(s) and g'(s) breakpoints", cmd_export_schedule},
        {"verify", "Run the invariant suite and report pass/fail", cmd_verify},
    };

    std::vector<std::pair<CLI::App*, const Entry*>> subs;
    for (const auto& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--config", config_path, "JSON run config (defaults apply to missing keys)")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--workers", workers, "Worker threads (overrides workers)")->check(CLI::PositiveNumber);
        sub->add_option("--seed-override", seed_override, "Replace the coupling seed and J-seed sweep");
        if (std::string(e.name) == "verify") {
            sub->add_flag("--debug-corrupt-feedback-sign", debug_corrupt,
                          "Flip the sign of the dB_z feedback term (mutation check; must fail)");
        }
        subs.emplace_back(sub, &e);
    }

    CLI11_PARSE(app, argc, argv);

    for (const auto& [sub, entry] : subs) {
        if (!sub->parsed()) continue;
        try {
            RunConfig config = config_path.empty() ? config_from_json(nlohmann::json::object()) : load_config(config_path);
            if (sub->count("--out")) config.output_dir = out_dir;
            if (sub->count("--workers")) config.workers = workers;
            if (sub->count("--seed-override")) apply_seed_override(config, seed_override);
            if (debug_corrupt) config.verify.corrupt_feedback_sign = true;
            return entry->run(config, std::cout);
        } catch (const mfcd::ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kConfigError;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kInvariantFailure;
        }
    }
    return kConfigError;
}
