#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kmtdep/harness.hpp"

namespace {

bool is_power_of_three(std::int64_t n) {
    while (n > 1 && n % 3 == 0) n /= 3;
    return n == 1;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace kmtdep;
    CLI::App app{"Strong approximation toolkit for causal stationary processes"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
    std::optional<std::string> n_grid;

    auto add_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI config file")->required();
        sub->add_option("--seed", seed, "master seed (overrides the config)");
        sub->add_option("--workers", workers, "worker threads; falls back to KMT_DEP_WORKERS, then the config");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--n-grid", n_grid, "grid of n, e.g. 3^6..3^10 or 729,2187");
    };
    auto* simulate = app.add_subcommand("simulate", "write one decomposed path (paths.csv, blocks.csv)");
    auto* depmeasure = app.add_subcommand("depmeasure", "estimate the dependence profile (profile.csv)");
    auto* check = app.add_subcommand("check-conditions", "check the summability conditions (exit 2 on failure)");
    auto* sip = app.add_subcommand("sip-experiment", "coupled paths and rate fit");
    auto* report = app.add_subcommand("report", "everything, with report.txt and the CSV bundle");
    for (auto* s : {simulate, depmeasure, check, sip, report}) add_flags(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    ExperimentConfig cfg;
    try {
        cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (out) cfg.out = *out;
        if (workers) {
            cfg.workers = *workers;
        } else if (const char* env = std::getenv("KMT_DEP_WORKERS")) {
            try {
                cfg.workers = std::stoi(env);
            } catch (const std::exception&) {
                throw ConfigError("KMT_DEP_WORKERS", std::string("expected an integer, got '") + env + "'");
            }
        }
        if (n_grid) {
            try {
                cfg.n_grid = parse_n_grid(*n_grid);
            } catch (const std::exception& e) {
                throw ConfigError("--n-grid", e.what());
            }
        }
        if (cfg.workers < 0) throw ConfigError("experiment.workers", "must be >= 0");
        validate(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    for (auto n : cfg.n_grid)
        if (!is_power_of_three(n))
            std::cerr << "warning: n = " << n << " is not a power of 3; the top scale is partial\n";

    try {
        if (*simulate) return cmd_simulate(cfg, std::cout);
        if (*depmeasure) return cmd_depmeasure(cfg, std::cout);
        if (*check) return cmd_check_conditions(cfg, std::cout);
        if (*sip) return cmd_sip_experiment(cfg, std::cout);
        return cmd_report(cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
