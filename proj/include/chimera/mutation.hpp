#pragma once

#include <cstdint>
#include <vector>

#include "chimera/genome.hpp"

namespace chimera {

struct MutationConfig {
    double p_add = 0.30;
    double p_remove = 0.30;
    double p_modify = 0.30;
    double p_reseed = 0.10;
    int max_retries = 16;
};

/// Probabilities must be in [0, 1] and sum to 1 within 1e-9.
void validate(const MutationConfig& cfg);

enum class MutationKind : std::uint8_t { AddLayer, RemoveLayer, ModifyLayer, ReseedWeights };

std::string to_string(MutationKind kind);

/// Standard deviation of the step-count draw: cube root of (1 + exhaustion).
double step_stddev(std::uint64_t exhaustion);

/// max(1, ceil(x)) with x ~ Normal(1, cbrt(1 + exhaustion)).
int step_count(std::uint64_t exhaustion, RandomSource& rng);

/// 5 n_pool / (5 n_pool + n_conv); 5/6 for an empty census.
double conv_probability(int n_pool, int n_conv);

/// New Conv or pooling layer whose type mix steers the stack toward five convs per pool.
LayerSpec sample_layer(const LayerCensus& census, const SearchBounds& bounds, RandomSource& rng);

MutationKind sample_mutation_kind(const MutationConfig& cfg, RandomSource& rng);

/// Applies one step in place and returns the kind actually performed.
/// ReseedWeights on a genome without Conv layers falls through to ModifyLayer.
MutationKind apply_mutation_step(Genome& genome, MutationKind kind, const SearchBounds& bounds,
                                 RandomSource& rng);

struct MutationReport {
    Genome genome;
    int steps = 0;                     // steps drawn for the accepted attempt
    std::vector<MutationKind> kinds;   // kinds applied in the accepted attempt
    int attempts = 0;
    bool fell_back = false;            // every attempt failed; genome is the parent copy
};

MutationReport mutate_detailed(const Genome& parent, std::uint64_t exhaustion, const MutationConfig& cfg,
                               const SearchBounds& bounds, RandomSource& rng);

inline Genome mutate(const Genome& parent, std::uint64_t exhaustion, const MutationConfig& cfg,
                     const SearchBounds& bounds, RandomSource& rng) {
    return mutate_detailed(parent, exhaustion, cfg, bounds, rng).genome;
}

}  // namespace chimera
