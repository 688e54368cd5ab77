// Command-line front end: resolves a run configuration and executes one scenario.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mcac/config.hpp"
#include "mcac/errors.hpp"
#include "mcac/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::string key_listing() {
    std::string out = "\nConfig keys (default):\n";
    for (const auto& [k, v] : mcac::config_defaults()) {
        out += "  " + k + " = " + (v.empty() ? "\"\"" : v) + "\n";
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multichannel access agents: training, sweeps and timing"};
    app.footer(key_listing());

    std::optional<std::string> config_path;
    std::optional<std::string> scenario;
    std::optional<std::string> out_dir;
    std::optional<std::string> checkpoint;
    std::vector<std::string> sets;

    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--scenario", scenario,
                   "round_robin_sweep | arbitrary_orders | time_varying | runtime | train");
    app.add_option("--set", sets, "override one key (KEY=VALUE, repeatable)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--checkpoint", checkpoint, "save the trained agent here (train)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        mcac::Overrides overrides;
        if (scenario) overrides.emplace_back("scenario", *scenario);
        if (out_dir) overrides.emplace_back("out", *out_dir);
        if (checkpoint) overrides.emplace_back("checkpoint", *checkpoint);
        for (const auto& s : sets) overrides.push_back(mcac::split_assignment(s));

        const auto config = mcac::parse_config(config_path, overrides);
        mcac::run_scenario(config, std::cout);
    } catch (const mcac::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
