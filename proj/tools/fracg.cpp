#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "fracg/config.hpp"
#include "fracg/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fracg: nonlocal G-Laplacian Dirichlet solver and estimate checker"};
    app.require_subcommand(1);
    app.fallthrough();

    std::uint64_t seed = 0;
    std::string out;
    unsigned jobs = 1;
    double tol = 0.0;
    auto* seed_opt = app.add_option("--seed", seed, "RNG seed for sampling stages (overrides the config)");
    auto* out_opt = app.add_option("--out", out, "Output directory (default: config, then $FRACG_OUTPUT_DIR)");
    app.add_option("--jobs", jobs, "Worker threads for sweep points")->check(CLI::PositiveNumber);
    auto* tol_opt = app.add_option("--tol", tol, "Solver tolerance (overrides the config)")->check(CLI::PositiveNumber);

    std::string config;
    fracg::RunMode mode = fracg::RunMode::All;
    struct Sub {
        const char* name;
        const char* help;
        fracg::RunMode mode;
    };
    const Sub subs[] = {
        {"solve", "Run the solve stage only", fracg::RunMode::Solve},
        {"verify", "Run solve and verify stages", fracg::RunMode::Verify},
        {"sweep", "Run sweep stages (solving first when needed)", fracg::RunMode::Sweep},
        {"run", "Run the whole pipeline in order", fracg::RunMode::All},
    };
    for (const Sub& s : subs) {
        auto* sc = app.add_subcommand(s.name, s.help);
        sc->add_option("config", config, "Run configuration (JSON)")->required();
        const fracg::RunMode m = s.mode;
        sc->callback([&mode, m] { mode = m; });
    }
    auto* schema = app.add_subcommand("schema", "Print the configuration JSON schema");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : fracg::kExitSchema;
    }

    if (schema->parsed()) {
        std::cout << fracg::run_config_schema() << '\n';
        return 0;
    }
    fracg::RunOverrides ov;
    if (*seed_opt) ov.seed = seed;
    if (*out_opt) ov.out = out;
    if (*tol_opt) ov.tol = tol;
    ov.jobs = jobs;
    return fracg::run_file(config, mode, ov, std::cerr);
}
