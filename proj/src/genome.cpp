#include "chimera/genome.hpp"

#include <bit>
#include <cstdio>
#include <sstream>

#include "chimera/errors.hpp"
#include "chimera/mutation.hpp"
#include "chimera/repair.hpp"

namespace chimera {

LayerSpec LayerSpec::conv(Extent kernel, Extent stride, Extent padding, std::uint64_t weight_seed) {
    LayerSpec layer;
    layer.kind = LayerKind::Conv;
    layer.kernel = kernel;
    layer.stride = stride;
    layer.padding = padding;
    layer.weight_seed = weight_seed;
    return layer;
}

LayerSpec LayerSpec::pool(LayerKind kind, Extent kernel, Extent stride, Extent padding) {
    LayerSpec layer;
    layer.kind = kind;
    layer.kernel = kernel;
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

bool is_well_formed(const LayerSpec& layer) {
    if (layer.is_activation()) {
        return layer.kernel == Extent{} && layer.stride == Extent{} && layer.padding == Extent{} &&
               layer.weight_seed == 0;
    }
    if (layer.is_pool() && layer.weight_seed != 0) return false;
    for (Axis axis : kAxes) {
        const int k = layer.kernel[axis];
        if (k < 1 || k > kMaxKernel) return false;
        if (layer.stride[axis] < 1) return false;
        if (layer.padding[axis] < 0 || layer.padding[axis] > k - 1) return false;
    }
    return true;
}

bool same_architecture(const Genome& a, const Genome& b) {
    return a.input_shape == b.input_shape && a.layers == b.layers && a.output_arity == b.output_arity &&
           a.lr_hint == b.lr_hint && a.channel_width == b.channel_width;
}

void validate(const SearchBounds& bounds) {
    if (bounds.max_layers < 1) throw ConfigError("bounds.max_layers", "must be >= 1");
    if (bounds.kernel_min < 1 || bounds.kernel_min > kMaxKernel)
        throw ConfigError("mutation.kernel_min", "must lie within [1, 7]");
    if (bounds.kernel_max < bounds.kernel_min || bounds.kernel_max > kMaxKernel)
        throw ConfigError("mutation.kernel_max", "must lie within [kernel_min, 7]");
    if (bounds.conv_stride.height < 1 || bounds.conv_stride.width < 1)
        throw ConfigError("bounds.conv_stride", "must be >= 1");
    if (bounds.pool_stride && (bounds.pool_stride->height < 1 || bounds.pool_stride->width < 1))
        throw ConfigError("bounds.pool_stride", "must be >= 1");
    if (!(bounds.default_lr > 0.0)) throw ConfigError("bounds.default_lr", "must be positive");
    const Shape& in = bounds.input_shape;
    if (in.channels < 1 || in.height < 1 || in.width < 1)
        throw ConfigError("bounds.input_shape", "dimensions must be positive");
    if (bounds.output_arity < 1) throw ConfigError("bounds.output_arity", "must be >= 1");
    if (bounds.channel_width < 1) throw ConfigError("bounds.channel_width", "must be >= 1");
    if (bounds.max_retries < 1) throw ConfigError("bounds.max_retries", "must be >= 1");
}

ShapeResult infer_shapes(const Genome& genome) {
    ShapeTrace trace;
    trace.reserve(genome.layers.size() + 1);
    trace.push_back(genome.input_shape);
    for (std::size_t i = 0; i < genome.layers.size(); ++i) {
        const LayerSpec& layer = genome.layers[i];
        Shape next = trace.back();
        if (!layer.is_activation()) {
            next.height = window_output(next.height, layer.kernel.height, layer.stride.height, layer.padding.height);
            next.width = window_output(next.width, layer.kernel.width, layer.stride.width, layer.padding.width);
            if (next.height < 1) return ShapeError{i, Axis::Height};
            if (next.width < 1) return ShapeError{i, Axis::Width};
            if (layer.is_conv()) next.channels = genome.channel_width;
        }
        trace.push_back(next);
    }
    return trace;
}

bool is_shape_valid(const Genome& genome) { return std::holds_alternative<ShapeTrace>(infer_shapes(genome)); }

LayerCensus layer_census(std::span<const LayerSpec> layers) {
    LayerCensus census;
    for (const LayerSpec& layer : layers) {
        if (layer.is_conv())
            ++census.n_conv;
        else if (layer.is_pool())
            ++census.n_pool;
        else
            ++census.n_act;
    }
    return census;
}

namespace {

class Fnv1a {
public:
    void bytes(const void* data, std::size_t size) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < size; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ULL;
        }
    }
    // Little-endian fixed-width encoding keeps the hash platform independent.
    void u64(std::uint64_t v) {
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, sizeof buf);
    }
    void i32(int v) { u64(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    void extent(const Extent& e) {
        i32(e.height);
        i32(e.width);
    }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t genome_fingerprint(const Genome& genome) {
    Fnv1a h;
    h.i32(kGenomeFormatVersion);
    h.i32(genome.input_shape.channels);
    h.i32(genome.input_shape.height);
    h.i32(genome.input_shape.width);
    h.i32(genome.output_arity);
    h.u64(std::bit_cast<std::uint64_t>(genome.lr_hint));
    h.i32(genome.channel_width);
    h.u64(genome.layers.size());
    for (const LayerSpec& layer : genome.layers) {
        h.i32(static_cast<int>(layer.kind));
        h.extent(layer.kernel);
        h.extent(layer.stride);
        h.extent(layer.padding);
        h.i32(static_cast<int>(layer.activation));
        h.u64(layer.weight_seed);
    }
    return h.value();
}

bool within_bounds(const Genome& genome, const SearchBounds& bounds) {
    if (genome.layers.empty() || static_cast<int>(genome.layers.size()) > bounds.max_layers) return false;
    for (const LayerSpec& layer : genome.layers)
        if (!is_well_formed(layer)) return false;
    return is_shape_valid(genome);
}

namespace {

std::string lineage_tag(RandomSource& rng) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%06x", static_cast<unsigned>(rng() & 0xffffffu));
    return buf;
}

}  // namespace

Genome random_genome(const SearchBounds& bounds, RandomSource& rng) {
    for (int attempt = 0; attempt < bounds.max_retries; ++attempt) {
        Genome genome;
        genome.input_shape = bounds.input_shape;
        genome.output_arity = bounds.output_arity;
        genome.lr_hint = bounds.default_lr;
        genome.channel_width = bounds.channel_width;
        genome.lineage_id = "r" + lineage_tag(rng);
        const int n_layers = rng.uniform_int(1, bounds.max_layers);
        genome.layers.reserve(static_cast<std::size_t>(n_layers));
        for (int i = 0; i < n_layers; ++i) genome.layers.push_back(sample_layer(layer_census(genome), bounds, rng));

        RepairOutcome repaired = repair(genome);
        if (repaired.ok && within_bounds(repaired.genome, bounds)) return std::move(repaired.genome);
    }
    throw GenerationExhausted("no valid genome within " + std::to_string(bounds.max_retries) +
                              " attempts; bounds are too tight for the input shape");
}

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::Activation: return "relu";
    }
    return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "conv") return LayerKind::Conv;
    if (name == "maxpool") return LayerKind::MaxPool;
    if (name == "avgpool") return LayerKind::AvgPool;
    if (name == "relu") return LayerKind::Activation;
    throw SchemaError("unknown layer kind '" + name + "'");
}

namespace {

nlohmann::json extent_json(const Extent& e) { return nlohmann::json::array({e.height, e.width}); }

template <typename T>
T require(const nlohmann::json& obj, const char* field) {
    if (!obj.is_object() || !obj.contains(field)) throw SchemaError(std::string("missing field '") + field + "'");
    try {
        return obj.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(std::string("field '") + field + "' has the wrong type");
    }
}

Extent require_extent(const nlohmann::json& obj, const char* field) {
    const auto values = require<std::vector<int>>(obj, field);
    if (values.size() != 2) throw SchemaError(std::string("field '") + field + "' must have two entries");
    return {values[0], values[1]};
}

}  // namespace

nlohmann::json to_json(const Genome& genome) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerSpec& layer : genome.layers) {
        nlohmann::json item{{"kind", to_string(layer.kind)}};
        if (!layer.is_activation()) {
            item["kernel"] = extent_json(layer.kernel);
            item["stride"] = extent_json(layer.stride);
            item["padding"] = extent_json(layer.padding);
        }
        if (layer.is_conv()) item["weight_seed"] = layer.weight_seed;
        layers.push_back(std::move(item));
    }
    return {
        {"version", kGenomeFormatVersion},
        {"input_shape", {genome.input_shape.channels, genome.input_shape.height, genome.input_shape.width}},
        {"layers", std::move(layers)},
        {"output_arity", genome.output_arity},
        {"lr_hint", genome.lr_hint},
        {"channel_width", genome.channel_width},
        {"lineage_id", genome.lineage_id},
    };
}

Genome genome_from_json(const nlohmann::json& record) {
    if (!record.is_object()) throw SchemaError("genome record must be an object");
    if (record.contains("version") && record.at("version") != kGenomeFormatVersion)
        throw SchemaError("unsupported genome record version");

    Genome genome;
    const auto shape = require<std::vector<int>>(record, "input_shape");
    if (shape.size() != 3) throw SchemaError("field 'input_shape' must have three entries");
    genome.input_shape = {shape[0], shape[1], shape[2]};
    if (genome.input_shape.channels < 1 || genome.input_shape.height < 1 || genome.input_shape.width < 1)
        throw SchemaError("field 'input_shape' must be positive");
    genome.output_arity = require<int>(record, "output_arity");
    genome.lr_hint = require<double>(record, "lr_hint");
    genome.channel_width = require<int>(record, "channel_width");
    genome.lineage_id = record.contains("lineage_id") ? require<std::string>(record, "lineage_id") : std::string{};
    if (genome.output_arity < 1) throw SchemaError("field 'output_arity' must be positive");
    if (!(genome.lr_hint > 0.0)) throw SchemaError("field 'lr_hint' must be positive");
    if (genome.channel_width < 1) throw SchemaError("field 'channel_width' must be positive");

    if (!record.contains("layers") || !record.at("layers").is_array()) throw SchemaError("missing field 'layers'");
    for (const auto& item : record.at("layers")) {
        const LayerKind kind = layer_kind_from_string(require<std::string>(item, "kind"));
        LayerSpec layer;
        if (kind == LayerKind::Activation) {
            layer = LayerSpec::relu();
        } else if (kind == LayerKind::Conv) {
            layer = LayerSpec::conv(require_extent(item, "kernel"), require_extent(item, "stride"),
                                    require_extent(item, "padding"), require<std::uint64_t>(item, "weight_seed"));
        } else {
            layer = LayerSpec::pool(kind, require_extent(item, "kernel"), require_extent(item, "stride"),
                                    require_extent(item, "padding"));
        }
        if (!is_well_formed(layer))
            throw SchemaError("layer " + std::to_string(genome.layers.size()) + " violates kernel/stride/padding limits");
        genome.layers.push_back(layer);
    }
    if (genome.layers.empty()) throw SchemaError("field 'layers' must not be empty");
    return genome;
}

std::string describe(const Genome& genome) {
    std::ostringstream os;
    const ShapeResult shapes = infer_shapes(genome);
    const auto* trace = std::get_if<ShapeTrace>(&shapes);
    os << "lineage " << (genome.lineage_id.empty() ? "-" : genome.lineage_id) << "  lr_hint " << genome.lr_hint
       << "  fingerprint " << std::hex << genome_fingerprint(genome) << std::dec << '\n';
    os << "input  (" << genome.input_shape.channels << ", " << genome.input_shape.height << ", "
       << genome.input_shape.width << ")\n";
    char line[160];
    for (std::size_t i = 0; i < genome.layers.size(); ++i) {
        const LayerSpec& l = genome.layers[i];
        if (l.is_activation()) {
            std::snprintf(line, sizeof line, "%3zu  %-8s %-24s", i, "relu", "");
        } else {
            char geom[64];
            std::snprintf(geom, sizeof geom, "k=%dx%d s=%dx%d p=%dx%d", l.kernel.height, l.kernel.width,
                          l.stride.height, l.stride.width, l.padding.height, l.padding.width);
            std::snprintf(line, sizeof line, "%3zu  %-8s %-24s", i, to_string(l.kind).c_str(), geom);
        }
        os << line;
        if (trace) {
            const Shape& s = (*trace)[i + 1];
            os << " -> (" << s.channels << ", " << s.height << ", " << s.width << ")";
        }
        os << '\n';
    }
    if (const auto* err = std::get_if<ShapeError>(&shapes))
        os << "shape error at layer " << err->layer_index << " ("
           << (err->axis == Axis::Height ? "height" : "width") << ")\n";
    os << "head   flatten + dense -> " << genome.output_arity << '\n';
    return os.str();
}

}  // namespace chimera
