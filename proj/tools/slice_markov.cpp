// slice-markov: command-line front end over the slicemk C API.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "slicemk/slicemk.h"

namespace {

int report(sm_status status) {
    std::cerr << "slice-markov: " << sm_last_error() << '\n';
    return static_cast<int>(status);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synchronous slice admission control as a Markov chain"};
    app.set_version_flag("--version", std::string(sm_version()));

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    unsigned workers = 0;
    std::string format;
    bool no_renormalize = false;

    app.add_option("--config", config_path, "Experiment JSON (default: bundled configuration)");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Override sim.seed");
    app.add_option("--workers", workers, "Worker threads (0 = available parallelism)");
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--no-renormalize", no_renormalize, "Keep truncated matrix rows unnormalized");

    const char* commands[][2] = {
        {"region", "List the admissibility region"},
        {"strategies", "List all valid slicing strategies"},
        {"matrix", "Write analytical transition matrices"},
        {"simulate", "Run the Monte-Carlo simulator and write traces and empirical matrices"},
        {"figure2", "Per-period state PMFs, analytical vs simulated"},
        {"figure3", "Matrix estimation error against the truncation bound"},
    };
    std::string command;
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->fallthrough();
        sub->callback([&command, n = std::string(name)] { command = n; });
    }
    app.require_subcommand(1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(SM_ERR_CONFIG);
    }

    sm_experiment* exp = nullptr;
    sm_status status = config_path.empty() ? sm_experiment_load_default(&exp)
                                           : sm_experiment_load_file(config_path.c_str(), &exp);
    if (status != SM_OK) return report(status);

    if (seed) status = sm_experiment_set_seed(exp, *seed);
    if (status == SM_OK && no_renormalize) status = sm_experiment_set_renormalize(exp, 0);
    if (status == SM_OK && !format.empty()) status = sm_experiment_set_format(exp, format.c_str());
    if (status == SM_OK)
        status = sm_experiment_run(exp, command.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), workers);
    sm_experiment_destroy(exp);
    if (status != SM_OK) return report(status);
    return 0;
}
