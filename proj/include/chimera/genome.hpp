#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "chimera/random.hpp"

namespace chimera {

/// Hard bound on every kernel dimension.
inline constexpr int kMaxKernel = 7;

/// Version tag written into every serialized genome record.
inline constexpr int kGenomeFormatVersion = 1;

enum class LayerKind : std::uint8_t { Conv, MaxPool, AvgPool, Activation };
enum class ActivationKind : std::uint8_t { ReLU };
enum class Axis : std::uint8_t { Height, Width };

/// A (height, width) pair of integers.
struct Extent {
    int height = 0;
    int width = 0;

    constexpr int operator[](Axis axis) const { return axis == Axis::Height ? height : width; }
    constexpr int& operator[](Axis axis) { return axis == Axis::Height ? height : width; }
    friend constexpr bool operator==(const Extent&, const Extent&) = default;
};

inline constexpr Axis kAxes[] = {Axis::Height, Axis::Width};

struct LayerSpec {
    LayerKind kind = LayerKind::Activation;
    Extent kernel;   // zero for Activation
    Extent stride;   // zero for Activation
    Extent padding;  // zero for Activation
    ActivationKind activation = ActivationKind::ReLU;
    std::uint64_t weight_seed = 0;  // Conv only

    static LayerSpec conv(Extent kernel, Extent stride, Extent padding, std::uint64_t weight_seed);
    static LayerSpec pool(LayerKind kind, Extent kernel, Extent stride, Extent padding);
    static LayerSpec relu();

    bool is_conv() const { return kind == LayerKind::Conv; }
    bool is_pool() const { return kind == LayerKind::MaxPool || kind == LayerKind::AvgPool; }
    bool is_activation() const { return kind == LayerKind::Activation; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Checks the per-layer invariants (kernel bound, stride, padding range, empty activation geometry).
bool is_well_formed(const LayerSpec& layer);

struct Shape {
    int channels = 0;
    int height = 0;
    int width = 0;

    friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

/// One entry per layer boundary, starting at the input shape.
using ShapeTrace = std::vector<Shape>;

struct ShapeError {
    std::size_t layer_index = 0;
    Axis axis = Axis::Height;

    friend constexpr bool operator==(const ShapeError&, const ShapeError&) = default;
};

struct Genome {
    Shape input_shape{3, 32, 32};
    std::vector<LayerSpec> layers;
    int output_arity = 10;
    double lr_hint = 1e-3;
    std::string lineage_id;
    int channel_width = 32;

    friend bool operator==(const Genome&, const Genome&) = default;
};

/// Equality on every field except lineage_id.
bool same_architecture(const Genome& a, const Genome& b);

/// Limits of the architecture space and the defaults new genomes start from.
struct SearchBounds {
    int max_layers = 12;
    int kernel_min = 1;
    int kernel_max = kMaxKernel;
    Extent conv_stride{1, 1};
    std::optional<Extent> pool_stride;  // unset: stride equals kernel
    double default_lr = 1e-3;
    Shape input_shape{3, 32, 32};
    int output_arity = 10;
    int channel_width = 32;
    int max_retries = 16;
};

/// Throws ConfigError naming the offending field.
void validate(const SearchBounds& bounds);

/// Output extent of a windowed layer along one axis: floor((n + 2p - k) / s) + 1.
constexpr int window_output(int in, int kernel, int stride, int padding) {
    const int span = in + 2 * padding - kernel;
    if (span < 0) return 0;
    return span / stride + 1;
}

using ShapeResult = std::variant<ShapeTrace, ShapeError>;

ShapeResult infer_shapes(const Genome& genome);
bool is_shape_valid(const Genome& genome);

struct LayerCensus {
    int n_conv = 0;
    int n_pool = 0;
    int n_act = 0;

    friend constexpr bool operator==(const LayerCensus&, const LayerCensus&) = default;
};

LayerCensus layer_census(std::span<const LayerSpec> layers);
inline LayerCensus layer_census(const Genome& genome) { return layer_census(genome.layers); }

/// Content hash over every field except lineage_id. Stable across processes and platforms.
std::uint64_t genome_fingerprint(const Genome& genome);

/// Random architecture: uniform layer count, layers from sample_layer, then repaired.
/// Throws GenerationExhausted after bounds.max_retries invalid attempts.
Genome random_genome(const SearchBounds& bounds, RandomSource& rng);

/// True when the genome satisfies the bounds' layer-count and kernel limits and is shape-valid.
bool within_bounds(const Genome& genome, const SearchBounds& bounds);

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

nlohmann::json to_json(const Genome& genome);
/// Throws SchemaError on missing fields, wrong types, unknown kinds or broken layer invariants.
Genome genome_from_json(const nlohmann::json& record);

/// Human-readable table of the layer stack with its shape trace.
std::string describe(const Genome& genome);

}  // namespace chimera
