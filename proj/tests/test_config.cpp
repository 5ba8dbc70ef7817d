#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "chimera/config.hpp"
#include "chimera/errors.hpp"

using namespace chimera;
using nlohmann::json;

namespace {

std::string failing_field(const json& doc) {
    try {
        parse_run_config(doc);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<accepted>";
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    const RunConfig cfg = parse_run_config(json::object());
    EXPECT_EQ(cfg.engine.population_size, 4u);
    EXPECT_EQ(cfg.evaluator.kind, "surrogate");
    EXPECT_TRUE(cfg.evaluator.cache);
    EXPECT_EQ(cfg.checkpoint_every, 1u);
    EXPECT_FALSE(cfg.seed_genome.has_value());
}

TEST(Config, ReadsEverySection) {
    const json doc = {
        {"engine", {{"population_size", 6}, {"max_iter", 3}, {"loss_threshold", 0.1}, {"max_exhaustion", 2},
                    {"rng_seed", 99}, {"parallel_evals", 2}, {"checkpoint_every", 2}}},
        {"mutation", {{"p_add", 0.4}, {"p_remove", 0.2}, {"p_modify", 0.3}, {"p_reseed", 0.1}, {"kernel_max", 5}}},
        {"bounds", {{"max_layers", 9}, {"input_shape", {1, 28, 28}}, {"pool_stride", {1, 1}}}},
        {"evaluator", {{"kind", "stub"}, {"cache", false}, {"stub", {{"loss", 0.25}}}, {"budget", {{"max_epochs", 4}}}}}};
    const RunConfig cfg = parse_run_config(doc);
    EXPECT_EQ(cfg.engine.population_size, 6u);
    EXPECT_EQ(*cfg.engine.loss_threshold, 0.1);
    EXPECT_EQ(*cfg.engine.max_exhaustion, 2u);
    EXPECT_EQ(cfg.engine.rng_seed, 99u);
    EXPECT_EQ(cfg.checkpoint_every, 2u);
    EXPECT_EQ(cfg.mutation.p_add, 0.4);
    EXPECT_EQ(cfg.bounds.kernel_max, 5);
    EXPECT_EQ(cfg.bounds.max_layers, 9);
    EXPECT_EQ(cfg.bounds.input_shape, (Shape{1, 28, 28}));
    EXPECT_EQ(*cfg.bounds.pool_stride, (Extent{1, 1}));
    EXPECT_EQ(cfg.evaluator.kind, "stub");
    EXPECT_FALSE(cfg.evaluator.cache);
    EXPECT_EQ(cfg.evaluator.stub_loss, 0.25);
    EXPECT_EQ(cfg.evaluator.budget->max_epochs, 4);
}

TEST(Config, JsonRoundTripIsStable) {
    const json doc = {{"engine", {{"population_size", 3}, {"max_exhaustion", 5}}},
                      {"evaluator", {{"surrogate", {{"target_seed", 7}, {"target_layers", 4}}}}}};
    const json once = to_json(parse_run_config(doc));
    const json twice = to_json(parse_run_config(once));
    EXPECT_EQ(once, twice);
}

TEST(Config, ErrorsNameTheField) {
    EXPECT_EQ(failing_field({{"engin", json::object()}}), "config.engin");
    EXPECT_EQ(failing_field({{"engine", {{"populaton_size", 2}}}}), "engine.populaton_size");
    EXPECT_EQ(failing_field({{"engine", {{"population_size", 0}}}}), "engine.population_size");
    EXPECT_EQ(failing_field({{"engine", {{"population_size", -3}}}}), "engine.population_size");
    EXPECT_EQ(failing_field({{"engine", {{"max_iter", "ten"}}}}), "engine.max_iter");
    EXPECT_EQ(failing_field({{"mutation", {{"kernel_max", 9}}}}), "mutation.kernel_max");
    EXPECT_EQ(failing_field({{"mutation", {{"kernel_min", 0}}}}), "mutation.kernel_min");
    EXPECT_EQ(failing_field({{"bounds", {{"input_shape", {3, 32}}}}}), "bounds.input_shape");
    EXPECT_EQ(failing_field({{"evaluator", {{"kind", "gpu"}}}}), "evaluator.kind");
    EXPECT_EQ(failing_field({{"evaluator", {{"kind", "external"}}}}), "evaluator.external.command");
    EXPECT_NE(failing_field({{"mutation", {{"p_add", 0.9}}}}).find("mutation.p_"), std::string::npos);
}

TEST(Config, SeedGenomeIsRepairedOnLoad) {
    Genome seed;
    seed.layers = {LayerSpec::conv({3, 3}, {1, 1}, {1, 1}, 5), LayerSpec::conv({3, 3}, {1, 1}, {1, 1}, 7)};
    const RunConfig cfg = parse_run_config({{"engine", {{"seed_genome", to_json(seed)}}}});
    ASSERT_TRUE(cfg.seed_genome.has_value());
    EXPECT_EQ(cfg.seed_genome->layers.size(), 3u);
    EXPECT_EQ(cfg.seed_genome->layers[1], LayerSpec::relu());

    json broken = to_json(seed);
    broken["layers"][0]["kernel"] = {0, 3};
    EXPECT_EQ(failing_field({{"engine", {{"seed_genome", broken}}}}), "engine.seed_genome");
}

TEST(Config, LoadFromFile) {
    const auto path = std::filesystem::temp_directory_path() / "chimera_cfg_test.json";
    {
        std::ofstream out(path);
        out << R"({"engine": {"max_iter": 2}})";
    }
    EXPECT_EQ(load_run_config(path).engine.max_iter, 2u);
    {
        std::ofstream out(path);
        out << "{";
    }
    EXPECT_THROW(load_run_config(path), ConfigError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_run_config(path), ConfigError);
}

TEST(EvaluatorStackTest, BuildsConfiguredStack) {
    RunConfig cfg = parse_run_config({{"evaluator", {{"kind", "stub"}, {"stub", {{"loss", 0.3}}}}}});
    EvaluatorStack stack(cfg);
    ASSERT_NE(stack.cache(), nullptr);
    Genome g;
    g.layers = {LayerSpec::conv({3, 3}, {1, 1}, {1, 1}, 5)};
    EXPECT_EQ(stack.evaluator().evaluate(g, 1).val_loss, 0.3);
    stack.evaluator().evaluate(g, 2);
    EXPECT_EQ(stack.cache()->hits(), 1u);

    cfg.evaluator.cache = false;
    EXPECT_EQ(EvaluatorStack(cfg).cache(), nullptr);
}

TEST(EvaluatorStackTest, ExternalUsesCommand) {
    RunConfig cfg = parse_run_config(
        {{"evaluator", {{"kind", "external"}, {"external", {{"command", {CHIMERA_STUB_WORKER_PATH, "--loss", "0.4"}}}}}}});
    EvaluatorStack stack(cfg);
    Genome g;
    g.layers = {LayerSpec::conv({3, 3}, {1, 1}, {1, 1}, 5)};
    EXPECT_EQ(stack.evaluator().evaluate(g, 1).val_loss, 0.4);
}
