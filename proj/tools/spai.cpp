// Command-line front end: generate | train | bench | spectral | verify.
#include "spai/error.hpp"
#include "spai/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Learned sparse approximate inverse preconditioners: datasets, training, benchmarks"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
    app.add_option("--config", config_path, "JSON config file (every field optional)");
    app.add_option("--seed", seed, "overrides every seed in the config");
    app.add_option("--out", out, "output directory");
    app.add_option("--threads", threads, "worker threads for bench and spectral")->check(CLI::PositiveNumber);

    auto* generate = app.add_subcommand("generate", "materialize a dataset family on disk");
    auto* train = app.add_subcommand("train", "train the GNN on the train split; writes checkpoint and logs");
    auto* bench = app.add_subcommand("bench", "PCG iterations and timings per test matrix and preconditioner");
    auto* spectral = app.add_subcommand("spectral", "condition numbers and the error-bound check");
    auto* verify = app.add_subcommand("verify", "run the property suite; exit 2 on failure");
    for (auto* sub : {generate, train, bench, spectral, verify}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        spai::ExperimentConfig cfg = config_path.empty() ? spai::config_from_json(nlohmann::json::object())
                                                         : spai::load_config(config_path);
        if (seed) cfg.override_seed(*seed);
        if (out) cfg.out = *out;
        if (threads) cfg.threads = *threads;

        if (generate->parsed()) spai::cmd_generate(cfg, std::cout);
        if (train->parsed()) {
            const auto log = spai::cmd_train(cfg, std::cout);
            if (log.diverged) return 1;
        }
        if (bench->parsed()) spai::cmd_bench(cfg, std::cout);
        if (spectral->parsed()) spai::cmd_spectral(cfg, std::cout);
        if (verify->parsed() && !spai::cmd_verify(cfg, std::cout)) return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
