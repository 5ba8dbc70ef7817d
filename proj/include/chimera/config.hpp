#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chimera/colony.hpp"
#include "chimera/evaluators.hpp"
#include "chimera/genome.hpp"
#include "chimera/genome_search.hpp"
#include "chimera/mutation.hpp"

namespace chimera {

struct EvaluatorConfig {
    std::string kind = "surrogate";  // surrogate | external | stub
    bool cache = true;
    std::optional<TrainingBudget> budget;

    // surrogate: explicit target, or a random target with target_layers layers
    std::optional<Genome> target;
    std::uint64_t target_seed = 1;
    int target_layers = 8;

    // external
    std::vector<std::string> command;
    double timeout_seconds = 3600.0;

    // stub
    double stub_loss = 0.5;
};

/// Everything needed to reproduce a run. JSON layout (all keys optional except where noted):
///
///   { "engine":    { "population_size", "max_iter", "loss_threshold", "max_exhaustion",
///                    "rng_seed", "parallel_evals", "init_retries", "checkpoint_every", "seed_genome" },
///     "mutation":  { "p_add", "p_remove", "p_modify", "p_reseed", "kernel_min", "kernel_max", "max_retries" },
///     "bounds":    { "max_layers", "input_shape", "output_arity", "channel_width", "default_lr",
///                    "conv_stride", "pool_stride" },
///     "evaluator": { "kind", "cache", "budget": {"max_epochs", "patience"},
///                    "surrogate": {"target" | "target_seed", "target_layers"},
///                    "external": {"command" (required for kind external), "timeout_seconds"},
///                    "stub": {"loss"} } }
///
/// Unknown keys are rejected so typos surface as errors.
struct RunConfig {
    ColonyConfig engine;
    MutationConfig mutation;
    SearchBounds bounds;
    std::optional<Genome> seed_genome;
    EvaluatorConfig evaluator;
    std::uint64_t checkpoint_every = 1;
};

/// Parses and validates. Throws ConfigError naming the offending field.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);
void validate(const RunConfig& config);

/// Evaluator stack described by the config (with the cache layer when enabled).
class EvaluatorStack {
public:
    explicit EvaluatorStack(const RunConfig& config);
    ~EvaluatorStack();

    GenomeEvaluator& evaluator() { return *top_; }
    /// Null when caching is disabled.
    const CachingEvaluator* cache() const { return cache_.get(); }

private:
    std::unique_ptr<GenomeEvaluator> base_;
    std::unique_ptr<CachingEvaluator> cache_;
    GenomeEvaluator* top_ = nullptr;
};

}  // namespace chimera
