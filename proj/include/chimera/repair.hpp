#pragma once

#include <optional>
#include <span>

#include "chimera/genome.hpp"

namespace chimera {

inline constexpr int kMaxRepairPasses = 32;

struct RepairOutcome {
    Genome genome;   // the repaired genome, or the untouched input when !ok
    bool ok = true;  // false: no fixpoint within kMaxRepairPasses or the result is shape-invalid
    int passes = 0;
};

/// Rewrites a layer stack until it is congruent:
///   R1  Conv, Conv        -> Conv, ReLU, Conv
///   R2  Pool_a, Pool_a    -> one pool with the composed receptive field (same subtype only)
///   R3  ReLU, Pool        -> Pool, ReLU
/// Rules run in that order within a pass; passes repeat until nothing changes.
RepairOutcome repair(const Genome& genome);

/// Single pooling layer equivalent to `first` followed by `second`:
/// kernel k1 + (k2 - 1) * s1, stride s1 * s2, padding of `first`.
/// Empty when the pair is not same-kind pooling or the composed kernel would exceed kMaxKernel.
std::optional<LayerSpec> merge_pools(const LayerSpec& first, const LayerSpec& second);

bool is_congruent(std::span<const LayerSpec> layers);
inline bool is_congruent(const Genome& genome) { return is_congruent(genome.layers); }

/// Number of adjacent pairs that violate one of the three rules (unmergeable pools excluded).
int incongruent_pairs(std::span<const LayerSpec> layers);

}  // namespace chimera
