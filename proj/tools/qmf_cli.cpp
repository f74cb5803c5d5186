// Experiment runner: parses a JSON config, dispatches the named experiment,
// and writes plot-ready CSV artifacts plus a rerun manifest.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qmf/config.hpp"
#include "qmf/experiments.hpp"
#include "qmf/version.hpp"

int main(int argc, char** argv) {
    CLI::App app{"qmf - controlled quantum filtering simulations"};
    app.set_version_flag("--version", QMF_VERSION_STRING);
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int64_t seed_override = -1;
    int threads_override = -1;

    CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "JSON experiment config")->required();
    run->add_option("--seed", seed_override, "override the config seed");
    run->add_option("--out", out_override, "override the output directory");
    run->add_option("--threads", threads_override,
                    "worker count (default: available parallelism)");

    CLI::App* list = app.add_subcommand("list", "list available experiments");

    CLI::App* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("config", config_path, "JSON experiment config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            std::cout << qmf::list_experiments();
            return 0;
        }
        if (validate->parsed()) {
            qmf::ExperimentConfig cfg = qmf::load_config_file(config_path);
            std::cout << "ok: experiment=" << cfg.experiment << " seed=" << cfg.seed << "\n";
            return 0;
        }
        qmf::ExperimentConfig cfg = qmf::load_config_file(config_path);
        if (seed_override >= 0) {
            cfg.seed = static_cast<uint64_t>(seed_override);
            cfg.resolved["seed"] = cfg.seed;
        }
        if (threads_override >= 0) {
            cfg.threads = threads_override;
            cfg.resolved["threads"] = cfg.threads;
        }
        const auto dir = qmf::run_experiment(cfg, out_override);
        std::cout << "wrote " << dir.string() << "\n";
        return 0;
    } catch (const qmf::ConfigInvalid& e) {
        std::cerr << "error: ConfigInvalid " << e.what() << "\n";
        return 2;
    } catch (const qmf::Error& e) {
        std::cerr << "error: " << e.code() << " " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: unexpected " << e.what() << "\n";
        return 3;
    }
}
