#include "chimera/config.hpp"

#include <chrono>
#include <fstream>
#include <set>

#include "chimera/evaluators.hpp"
#include "chimera/external.hpp"
#include "chimera/repair.hpp"

namespace chimera {

namespace {

using nlohmann::json;

const json& section(const json& doc, const char* name) {
    static const json empty = json::object();
    if (!doc.contains(name)) return empty;
    const json& s = doc.at(name);
    if (!s.is_object()) throw ConfigError(name, "must be an object");
    return s;
}

void reject_unknown(const json& obj, const std::string& prefix, std::set<std::string> known) {
    for (const auto& [key, value] : obj.items())
        if (!known.count(key)) throw ConfigError(prefix + "." + key, "unknown field");
}

template <typename T>
void read(const json& obj, const std::string& prefix, const char* key, T& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(prefix + "." + key, "has the wrong type");
    }
}

template <typename T>
void read_optional(const json& obj, const std::string& prefix, const char* key, std::optional<T>& out) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        out.reset();
        return;
    }
    T value{};
    read(obj, prefix, key, value);
    out = value;
}

Extent read_extent(const json& obj, const std::string& prefix, const char* key, Extent fallback) {
    if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
    std::vector<int> v;
    read(obj, prefix, key, v);
    if (v.size() != 2) throw ConfigError(prefix + "." + key, "must have two entries");
    return {v[0], v[1]};
}

Genome read_genome(const json& obj, const std::string& field) {
    try {
        return genome_from_json(obj);
    } catch (const SchemaError& e) {
        throw ConfigError(field, e.what());
    }
}

json extent_json(const Extent& e) { return json::array({e.height, e.width}); }

}  // namespace

RunConfig parse_run_config(const json& doc) {
    if (!doc.is_object()) throw ConfigError("config", "must be a JSON object");
    reject_unknown(doc, "config", {"engine", "mutation", "bounds", "evaluator"});
    RunConfig cfg;

    const json& engine = section(doc, "engine");
    reject_unknown(engine, "engine",
                   {"population_size", "max_iter", "loss_threshold", "max_exhaustion", "rng_seed", "parallel_evals",
                    "init_retries", "checkpoint_every", "seed_genome"});
    read(engine, "engine", "population_size", cfg.engine.population_size);
    read(engine, "engine", "max_iter", cfg.engine.max_iter);
    read_optional(engine, "engine", "loss_threshold", cfg.engine.loss_threshold);
    read_optional(engine, "engine", "max_exhaustion", cfg.engine.max_exhaustion);
    read(engine, "engine", "rng_seed", cfg.engine.rng_seed);
    read(engine, "engine", "parallel_evals", cfg.engine.parallel_evals);
    read(engine, "engine", "init_retries", cfg.engine.init_retries);
    read(engine, "engine", "checkpoint_every", cfg.checkpoint_every);
    if (engine.contains("seed_genome") && !engine.at("seed_genome").is_null())
        cfg.seed_genome = read_genome(engine.at("seed_genome"), "engine.seed_genome");
    // Guard against negative numbers silently wrapping into huge unsigned values.
    for (const char* key : {"population_size", "max_iter", "max_exhaustion", "parallel_evals", "checkpoint_every"})
        if (engine.contains(key) && engine.at(key).is_number_integer() && engine.at(key).get<long long>() < 0)
            throw ConfigError(std::string("engine.") + key, "must not be negative");

    const json& mutation = section(doc, "mutation");
    reject_unknown(mutation, "mutation",
                   {"p_add", "p_remove", "p_modify", "p_reseed", "kernel_min", "kernel_max", "max_retries"});
    read(mutation, "mutation", "p_add", cfg.mutation.p_add);
    read(mutation, "mutation", "p_remove", cfg.mutation.p_remove);
    read(mutation, "mutation", "p_modify", cfg.mutation.p_modify);
    read(mutation, "mutation", "p_reseed", cfg.mutation.p_reseed);
    read(mutation, "mutation", "kernel_min", cfg.bounds.kernel_min);
    read(mutation, "mutation", "kernel_max", cfg.bounds.kernel_max);
    read(mutation, "mutation", "max_retries", cfg.mutation.max_retries);
    cfg.bounds.max_retries = cfg.mutation.max_retries;

    const json& bounds = section(doc, "bounds");
    reject_unknown(bounds, "bounds",
                   {"max_layers", "input_shape", "output_arity", "channel_width", "default_lr", "conv_stride",
                    "pool_stride"});
    read(bounds, "bounds", "max_layers", cfg.bounds.max_layers);
    read(bounds, "bounds", "output_arity", cfg.bounds.output_arity);
    read(bounds, "bounds", "channel_width", cfg.bounds.channel_width);
    read(bounds, "bounds", "default_lr", cfg.bounds.default_lr);
    if (bounds.contains("input_shape")) {
        std::vector<int> shape;
        read(bounds, "bounds", "input_shape", shape);
        if (shape.size() != 3) throw ConfigError("bounds.input_shape", "must have three entries");
        cfg.bounds.input_shape = {shape[0], shape[1], shape[2]};
    }
    cfg.bounds.conv_stride = read_extent(bounds, "bounds", "conv_stride", cfg.bounds.conv_stride);
    if (bounds.contains("pool_stride") && !bounds.at("pool_stride").is_null())
        cfg.bounds.pool_stride = read_extent(bounds, "bounds", "pool_stride", {});

    const json& ev = section(doc, "evaluator");
    reject_unknown(ev, "evaluator", {"kind", "cache", "budget", "surrogate", "external", "stub"});
    read(ev, "evaluator", "kind", cfg.evaluator.kind);
    read(ev, "evaluator", "cache", cfg.evaluator.cache);
    if (ev.contains("budget") && !ev.at("budget").is_null()) {
        const json& b = section(ev, "budget");
        reject_unknown(b, "evaluator.budget", {"max_epochs", "patience"});
        TrainingBudget budget;
        read(b, "evaluator.budget", "max_epochs", budget.max_epochs);
        read(b, "evaluator.budget", "patience", budget.patience);
        cfg.evaluator.budget = budget;
    }
    const json& sur = section(ev, "surrogate");
    reject_unknown(sur, "evaluator.surrogate", {"target", "target_seed", "target_layers"});
    if (sur.contains("target") && !sur.at("target").is_null())
        cfg.evaluator.target = read_genome(sur.at("target"), "evaluator.surrogate.target");
    read(sur, "evaluator.surrogate", "target_seed", cfg.evaluator.target_seed);
    read(sur, "evaluator.surrogate", "target_layers", cfg.evaluator.target_layers);
    const json& ext = section(ev, "external");
    reject_unknown(ext, "evaluator.external", {"command", "timeout_seconds"});
    read(ext, "evaluator.external", "command", cfg.evaluator.command);
    read(ext, "evaluator.external", "timeout_seconds", cfg.evaluator.timeout_seconds);
    const json& stub = section(ev, "stub");
    reject_unknown(stub, "evaluator.stub", {"loss"});
    read(stub, "evaluator.stub", "loss", cfg.evaluator.stub_loss);

    if (cfg.seed_genome) {
        // Seeds go through the same congruence rules as every other genome.
        RepairOutcome repaired = repair(*cfg.seed_genome);
        if (!repaired.ok) throw ConfigError("engine.seed_genome", "cannot be repaired into a valid architecture");
        cfg.seed_genome = std::move(repaired.genome);
    }

    validate(cfg);
    return cfg;
}

void validate(const RunConfig& cfg) {
    validate(cfg.engine);
    validate(cfg.mutation);
    validate(cfg.bounds);
    if (cfg.checkpoint_every < 1) throw ConfigError("engine.checkpoint_every", "must be >= 1");
    if (cfg.seed_genome) {
        const Genome& seed = *cfg.seed_genome;
        if (!within_bounds(seed, cfg.bounds))
            throw ConfigError("engine.seed_genome", "is shape-invalid or longer than bounds.max_layers");
        if (seed.input_shape != cfg.bounds.input_shape || seed.output_arity != cfg.bounds.output_arity ||
            seed.channel_width != cfg.bounds.channel_width)
            throw ConfigError("engine.seed_genome", "input_shape/output_arity/channel_width must match bounds");
    }
    const auto& ev = cfg.evaluator;
    if (ev.kind != "surrogate" && ev.kind != "external" && ev.kind != "stub")
        throw ConfigError("evaluator.kind", "must be one of surrogate, external, stub");
    if (ev.budget && (ev.budget->max_epochs < 0 || ev.budget->patience < 0))
        throw ConfigError("evaluator.budget", "max_epochs and patience must be non-negative");
    if (ev.kind == "surrogate" && !ev.target && ev.target_layers < 1)
        throw ConfigError("evaluator.surrogate.target_layers", "must be >= 1");
    if (ev.kind == "external" && ev.command.empty())
        throw ConfigError("evaluator.external.command", "is required for the external evaluator");
    if (!(ev.timeout_seconds > 0.0)) throw ConfigError("evaluator.external.timeout_seconds", "must be positive");
    if (ev.kind == "stub" && !(ev.stub_loss >= 0.0)) throw ConfigError("evaluator.stub.loss", "must be non-negative");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("not valid JSON: ") + e.what());
    }
    return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
    json engine{{"population_size", cfg.engine.population_size},
                {"max_iter", cfg.engine.max_iter},
                {"loss_threshold", cfg.engine.loss_threshold ? json(*cfg.engine.loss_threshold) : json(nullptr)},
                {"max_exhaustion", cfg.engine.max_exhaustion ? json(*cfg.engine.max_exhaustion) : json(nullptr)},
                {"rng_seed", cfg.engine.rng_seed},
                {"parallel_evals", cfg.engine.parallel_evals},
                {"init_retries", cfg.engine.init_retries},
                {"checkpoint_every", cfg.checkpoint_every},
                {"seed_genome", cfg.seed_genome ? to_json(*cfg.seed_genome) : json(nullptr)}};
    json mutation{{"p_add", cfg.mutation.p_add},           {"p_remove", cfg.mutation.p_remove},
                  {"p_modify", cfg.mutation.p_modify},     {"p_reseed", cfg.mutation.p_reseed},
                  {"kernel_min", cfg.bounds.kernel_min},   {"kernel_max", cfg.bounds.kernel_max},
                  {"max_retries", cfg.mutation.max_retries}};
    const Shape& in = cfg.bounds.input_shape;
    json bounds{{"max_layers", cfg.bounds.max_layers},
                {"input_shape", {in.channels, in.height, in.width}},
                {"output_arity", cfg.bounds.output_arity},
                {"channel_width", cfg.bounds.channel_width},
                {"default_lr", cfg.bounds.default_lr},
                {"conv_stride", extent_json(cfg.bounds.conv_stride)},
                {"pool_stride", cfg.bounds.pool_stride ? extent_json(*cfg.bounds.pool_stride) : json(nullptr)}};
    const auto& ev = cfg.evaluator;
    json surrogate{{"target_seed", ev.target_seed}, {"target_layers", ev.target_layers}};
    if (ev.target) surrogate["target"] = to_json(*ev.target);
    json evaluator{{"kind", ev.kind},
                   {"cache", ev.cache},
                   {"budget", ev.budget ? json{{"max_epochs", ev.budget->max_epochs}, {"patience", ev.budget->patience}}
                                        : json(nullptr)},
                   {"surrogate", std::move(surrogate)},
                   {"external", {{"command", ev.command}, {"timeout_seconds", ev.timeout_seconds}}},
                   {"stub", {{"loss", ev.stub_loss}}}};
    return {{"engine", std::move(engine)},
            {"mutation", std::move(mutation)},
            {"bounds", std::move(bounds)},
            {"evaluator", std::move(evaluator)}};
}

EvaluatorStack::EvaluatorStack(const RunConfig& cfg) {
    const auto& ev = cfg.evaluator;
    if (ev.kind == "surrogate") {
        Genome target = ev.target ? *ev.target : make_surrogate_target(cfg.bounds, ev.target_layers, ev.target_seed);
        base_ = std::make_unique<SurrogateLandscape>(std::move(target), ev.budget);
    } else if (ev.kind == "stub") {
        base_ = std::make_unique<ConstantEvaluator>(ev.stub_loss, ev.budget);
    } else {
        ExternalCommand command;
        command.argv = ev.command;
        command.timeout = std::chrono::milliseconds(static_cast<long long>(ev.timeout_seconds * 1000.0));
        command.workers = cfg.engine.parallel_evals;
        base_ = std::make_unique<ExternalProcessEvaluator>(std::move(command), ev.budget);
    }
    top_ = base_.get();
    if (ev.cache) {
        cache_ = std::make_unique<CachingEvaluator>(*base_);
        top_ = cache_.get();
    }
}

EvaluatorStack::~EvaluatorStack() = default;

}  // namespace chimera
