#include "chimera/mutation.hpp"

#include <cmath>
#include <cstdio>

#include "chimera/errors.hpp"
#include "chimera/repair.hpp"

namespace chimera {

void validate(const MutationConfig& cfg) {
    const std::pair<const char*, double> probs[] = {
        {"mutation.p_add", cfg.p_add},
        {"mutation.p_remove", cfg.p_remove},
        {"mutation.p_modify", cfg.p_modify},
        {"mutation.p_reseed", cfg.p_reseed},
    };
    double total = 0.0;
    for (const auto& [field, p] : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "must be a probability in [0, 1]");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("mutation.p_add+p_remove+p_modify+p_reseed", "probabilities must sum to 1");
    if (cfg.max_retries < 1) throw ConfigError("mutation.max_retries", "must be >= 1");
}

std::string to_string(MutationKind kind) {
    switch (kind) {
        case MutationKind::AddLayer: return "add";
        case MutationKind::RemoveLayer: return "remove";
        case MutationKind::ModifyLayer: return "modify";
        case MutationKind::ReseedWeights: return "reseed";
    }
    return "unknown";
}

double step_stddev(std::uint64_t exhaustion) { return std::cbrt(1.0 + static_cast<double>(exhaustion)); }

int step_count(std::uint64_t exhaustion, RandomSource& rng) {
    const double x = rng.normal(1.0, step_stddev(exhaustion));
    const double steps = std::ceil(x);
    return steps < 1.0 ? 1 : static_cast<int>(steps);
}

double conv_probability(int n_pool, int n_conv) {
    if (n_pool == 0 && n_conv == 0) return 5.0 / 6.0;
    return 5.0 * n_pool / (5.0 * n_pool + n_conv);
}

namespace {

std::uint64_t fresh_weight_seed(RandomSource& rng) { return (rng() >> 32) | 1u; }

void resample_geometry(LayerSpec& layer, const SearchBounds& bounds, RandomSource& rng) {
    for (Axis axis : kAxes) {
        layer.kernel[axis] = rng.uniform_int(bounds.kernel_min, bounds.kernel_max);
        layer.padding[axis] = rng.uniform_int(0, layer.kernel[axis] - 1);
    }
    if (layer.is_conv())
        layer.stride = bounds.conv_stride;
    else
        layer.stride = bounds.pool_stride.value_or(layer.kernel);
}

LayerKind pool_subtype(RandomSource& rng) { return rng.bernoulli(0.5) ? LayerKind::MaxPool : LayerKind::AvgPool; }

}  // namespace

LayerSpec sample_layer(const LayerCensus& census, const SearchBounds& bounds, RandomSource& rng) {
    LayerSpec layer;
    if (rng.bernoulli(conv_probability(census.n_pool, census.n_conv))) {
        layer.kind = LayerKind::Conv;
        layer.weight_seed = fresh_weight_seed(rng);
    } else {
        layer.kind = pool_subtype(rng);
    }
    resample_geometry(layer, bounds, rng);
    return layer;
}

MutationKind sample_mutation_kind(const MutationConfig& cfg, RandomSource& rng) {
    const double u = rng.uniform01();
    if (u < cfg.p_add) return MutationKind::AddLayer;
    if (u < cfg.p_add + cfg.p_remove) return MutationKind::RemoveLayer;
    if (u < cfg.p_add + cfg.p_remove + cfg.p_modify) return MutationKind::ModifyLayer;
    return MutationKind::ReseedWeights;
}

MutationKind apply_mutation_step(Genome& genome, MutationKind kind, const SearchBounds& bounds, RandomSource& rng) {
    auto& layers = genome.layers;
    switch (kind) {
        case MutationKind::AddLayer: {
            const LayerSpec layer = sample_layer(layer_census(genome), bounds, rng);
            const auto pos = static_cast<std::ptrdiff_t>(rng.index(layers.size() + 1));
            layers.insert(layers.begin() + pos, layer);
            return kind;
        }
        case MutationKind::RemoveLayer: {
            if (layers.size() > 1) layers.erase(layers.begin() + static_cast<std::ptrdiff_t>(rng.index(layers.size())));
            return kind;
        }
        case MutationKind::ModifyLayer: {
            std::vector<std::size_t> candidates;
            for (std::size_t i = 0; i < layers.size(); ++i)
                if (!layers[i].is_activation()) candidates.push_back(i);
            if (candidates.empty()) return kind;
            LayerSpec& layer = layers[candidates[rng.index(candidates.size())]];
            if (layer.is_pool()) layer.kind = pool_subtype(rng);
            resample_geometry(layer, bounds, rng);
            return kind;
        }
        case MutationKind::ReseedWeights: {
            std::vector<std::size_t> convs;
            for (std::size_t i = 0; i < layers.size(); ++i)
                if (layers[i].is_conv()) convs.push_back(i);
            if (convs.empty()) return apply_mutation_step(genome, MutationKind::ModifyLayer, bounds, rng);
            // Uniform nonempty subset: uniform bitmask over all subsets, rejecting the empty one.
            std::vector<bool> chosen(convs.size());
            bool any = false;
            while (!any) {
                for (std::size_t i = 0; i < convs.size(); ++i) {
                    chosen[i] = rng.bernoulli(0.5);
                    any = any || chosen[i];
                }
            }
            for (std::size_t i = 0; i < convs.size(); ++i) {
                if (!chosen[i]) continue;
                std::uint64_t& seed = layers[convs[i]].weight_seed;
                const std::uint64_t old = seed;
                do {
                    seed = fresh_weight_seed(rng);
                } while (seed == old);
            }
            return kind;
        }
    }
    return kind;
}

MutationReport mutate_detailed(const Genome& parent, std::uint64_t exhaustion, const MutationConfig& cfg,
                               const SearchBounds& bounds, RandomSource& rng) {
    MutationReport report;
    for (int attempt = 1; attempt <= cfg.max_retries; ++attempt) {
        Genome child = parent;
        const int steps = step_count(exhaustion, rng);
        std::vector<MutationKind> kinds;
        kinds.reserve(static_cast<std::size_t>(steps));
        for (int s = 0; s < steps; ++s)
            kinds.push_back(apply_mutation_step(child, sample_mutation_kind(cfg, rng), bounds, rng));

        RepairOutcome repaired = repair(child);
        if (repaired.ok && within_bounds(repaired.genome, bounds)) {
            char tag[12];
            std::snprintf(tag, sizeof tag, ".%04x", static_cast<unsigned>(rng() & 0xffffu));
            repaired.genome.lineage_id = parent.lineage_id + tag;
            report.genome = std::move(repaired.genome);
            report.steps = steps;
            report.kinds = std::move(kinds);
            report.attempts = attempt;
            return report;
        }
    }
    report.genome = parent;
    report.attempts = cfg.max_retries;
    report.fell_back = true;
    return report;
}

}  // namespace chimera
