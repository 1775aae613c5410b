#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "immunet/config.hpp"
#include "immunet/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Two-tier overlay immunity simulator: worm outbreaks, guardian defense, "
                 "puzzle-gated external access"};
    app.name("immunet");

    std::string config_path, preset, out_dir;
    double scale = -1.0;
    std::int64_t seed = -1;
    bool dry_run = false;
    bool print_config = false;

    app.add_option("--config", config_path, "JSON config file")->type_name("PATH");
    app.add_option("--preset", preset, "experiment preset exp1..exp6")->type_name("NAME");
    app.add_option("--scale", scale, "population scale factor in (0,1]")->type_name("F");
    app.add_option("--seed", seed, "single seed overriding the seed list")->type_name("N");
    app.add_option("--out", out_dir, "output directory")->type_name("DIR");
    app.add_flag("--dry-run", dry_run, "print the expanded run matrix and exit");
    app.add_flag("--print-config", print_config, "print the resolved config and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    immunet::ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg = immunet::parse_config_file(config_path);
        if (!preset.empty()) immunet::apply_preset(cfg, preset);
        immunet::apply_env_overrides(cfg);
        if (scale > 0.0) cfg.scale_factor = scale;
        if (seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(seed)};
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        immunet::validate_config(cfg);
    } catch (const std::exception& e) {
        std::cerr << "immunet: " << e.what() << '\n';
        return 2;
    }

    if (print_config) {
        std::cout << immunet::config_to_json(cfg);
        return 0;
    }

    try {
        return immunet::run_experiment(cfg, dry_run, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "immunet: " << e.what() << '\n';
        return 1;
    }
}
