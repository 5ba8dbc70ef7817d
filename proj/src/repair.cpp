#include "chimera/repair.hpp"

#include <vector>

namespace chimera {

std::optional<LayerSpec> merge_pools(const LayerSpec& first, const LayerSpec& second) {
    if (!first.is_pool() || first.kind != second.kind) return std::nullopt;
    LayerSpec merged = first;
    for (Axis axis : kAxes) {
        const int kernel = first.kernel[axis] + (second.kernel[axis] - 1) * first.stride[axis];
        if (kernel > kMaxKernel) return std::nullopt;
        merged.kernel[axis] = kernel;
        merged.stride[axis] = first.stride[axis] * second.stride[axis];
    }
    return merged;
}

namespace {

bool violates(const LayerSpec& a, const LayerSpec& b) {
    if (a.is_conv() && b.is_conv()) return true;
    if (a.is_activation() && b.is_pool()) return true;
    return merge_pools(a, b).has_value();
}

// R1: an activation between every pair of adjacent convolutions.
bool separate_convolutions(std::vector<LayerSpec>& layers) {
    bool changed = false;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        if (layers[i].is_conv() && layers[i + 1].is_conv()) {
            layers.insert(layers.begin() + static_cast<std::ptrdiff_t>(i) + 1, LayerSpec::relu());
            changed = true;
        }
    }
    return changed;
}

// R2: collapse runs of same-kind pooling while the composed kernel stays in bounds.
bool combine_pools(std::vector<LayerSpec>& layers) {
    bool changed = false;
    std::size_t i = 0;
    while (i + 1 < layers.size()) {
        if (auto merged = merge_pools(layers[i], layers[i + 1])) {
            layers[i] = *merged;
            layers.erase(layers.begin() + static_cast<std::ptrdiff_t>(i) + 1);
            changed = true;
        } else {
            ++i;
        }
    }
    return changed;
}

// R3: pooling before activation.
bool hoist_pools(std::vector<LayerSpec>& layers) {
    bool changed = false;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        if (layers[i].is_activation() && layers[i + 1].is_pool()) {
            std::swap(layers[i], layers[i + 1]);
            changed = true;
        }
    }
    return changed;
}

}  // namespace

RepairOutcome repair(const Genome& genome) {
    Genome out = genome;
    int passes = 0;
    bool settled = false;
    while (passes < kMaxRepairPasses) {
        ++passes;
        bool changed = separate_convolutions(out.layers);
        changed |= combine_pools(out.layers);
        changed |= hoist_pools(out.layers);
        if (!changed) {
            settled = true;
            break;
        }
    }
    if (!settled || out.layers.empty() || !is_shape_valid(out)) return {genome, false, passes};
    return {std::move(out), true, passes};
}

int incongruent_pairs(std::span<const LayerSpec> layers) {
    int count = 0;
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        if (violates(layers[i], layers[i + 1])) ++count;
    return count;
}

bool is_congruent(std::span<const LayerSpec> layers) { return incongruent_pairs(layers) == 0; }

}  // namespace chimera
