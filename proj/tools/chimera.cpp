#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chimera/cli.hpp"
#include "chimera/errors.hpp"

int main(int argc, char** argv) {
    using namespace chimera::cli;

    CLI::App app{"Architecture search with an artificial bee colony"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint_path, run_dir, genome_path, format = "csv";
    std::optional<std::uint64_t> seed, halt_after;
    std::optional<std::string> evaluator;
    std::size_t index = 0;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "start a search");
    run->add_option("--config", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "run directory")->required();
    run->add_option("--seed", seed, "override engine.rng_seed");
    run->add_option("--evaluator", evaluator, "override evaluator.kind")
        ->check(CLI::IsMember({"surrogate", "external", "stub"}));
    run->add_option("--halt-after", halt_after, "stop after this many iterations, leaving a checkpoint");
    run->add_flag("--quiet", quiet, "suppress progress lines");

    auto* resume = app.add_subcommand("resume", "continue from a checkpoint");
    resume->add_option("checkpoint", checkpoint_path, "checkpoint.json of a run")->required();
    resume->add_option("--halt-after", halt_after, "stop after this many further iterations");
    resume->add_flag("--quiet", quiet, "suppress progress lines");

    auto* exp = app.add_subcommand("export", "write per-iteration statistics");
    exp->add_option("run_dir", run_dir, "run directory")->required();
    exp->add_option("--format", format, "output format")->check(CLI::IsMember({"csv"}));

    auto* vc = app.add_subcommand("validate-config", "check a configuration file");
    vc->add_option("config", config_path, "run configuration (JSON)")->required();

    auto* pg = app.add_subcommand("print-genome", "render a genome with its shape trace");
    pg->add_option("path", genome_path, "genome, final_models.json or checkpoint.json")->required();
    pg->add_option("--index", index, "entry to print when the file holds several genomes");

    CLI11_PARSE(app, argc, argv);

    RunOptions options;
    options.seed = seed;
    options.evaluator = evaluator;
    options.halt_after = halt_after;
    options.quiet = quiet;
    try {
        options.workers = workers_from_env();
    } catch (const chimera::ConfigError& e) {
        std::cerr << "{\"error\":\"config_error\",\"field\":\"CHIMERA_WORKERS\",\"message\":\"" << e.what() << "\"}\n";
        return kConfigError;
    }

    if (*run) return cmd_run(config_path, out_dir, options, std::cerr);
    if (*resume) return cmd_resume(checkpoint_path, options, std::cerr);
    if (*exp) return cmd_export(run_dir, format, std::cout, std::cerr);
    if (*vc) return cmd_validate_config(config_path, std::cout, std::cerr);
    if (*pg) return cmd_print_genome(genome_path, index, std::cout, std::cerr);
    return kRuntimeError;
}
