#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace chimera::cli {

inline constexpr const char* kEngineVersion = "1.0.0";

// Fixed artifact names inside a run directory.
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kEvaluationsFile = "evaluations.jsonl";
inline constexpr const char* kIterationsFile = "iterations.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kFinalModelsFile = "final_models.json";
inline constexpr const char* kErrorFile = "error.json";

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kConfigError = 2, kSnapshotError = 3 };

struct RunOptions {
    std::optional<std::uint64_t> seed;        // overrides engine.rng_seed
    std::optional<std::string> evaluator;     // overrides evaluator.kind
    std::optional<std::size_t> workers;       // overrides engine.parallel_evals
    std::optional<std::uint64_t> halt_after;  // leave the run checkpointed after this many iterations
    bool quiet = false;
};

/// CHIMERA_WORKERS, when set to a positive integer.
std::optional<std::size_t> workers_from_env();

int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, const RunOptions& options,
            std::ostream& log);
int cmd_resume(const std::filesystem::path& checkpoint_path, const RunOptions& options, std::ostream& log);
int cmd_export(const std::filesystem::path& run_dir, const std::string& format, std::ostream& out, std::ostream& log);
int cmd_validate_config(const std::filesystem::path& config_path, std::ostream& out, std::ostream& log);
int cmd_print_genome(const std::filesystem::path& path, std::size_t index, std::ostream& out, std::ostream& log);

}  // namespace chimera::cli
