#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "chimera/colony.hpp"
#include "chimera/errors.hpp"
#include "support/scripted.hpp"
#include "support/stats.hpp"

using namespace chimera;
using chimera::support::FunctionEvaluator;
using chimera::support::LineSpace;
using chimera::support::SequenceEvaluator;
using LineColony = Colony<LineSpace>;

namespace {

ColonyConfig config(std::size_t np, std::uint64_t iters, std::optional<std::uint64_t> max_ex = std::nullopt,
                    std::uint64_t seed = 1) {
    ColonyConfig c;
    c.population_size = np;
    c.max_iter = iters;
    c.max_exhaustion = max_ex;
    c.rng_seed = seed;
    return c;
}

double bowl(const std::int64_t& x) { return std::abs(static_cast<double>(x) - 500.0) / 100.0; }

}  // namespace

TEST(Fitness, Values) {
    EXPECT_EQ(fitness(0.0), 1.0);
    EXPECT_EQ(fitness(1.0), 0.5);
    EXPECT_EQ(fitness(3.0), 0.25);
    EXPECT_THROW(fitness(-0.1), ContractViolation);
    EXPECT_THROW(fitness(std::numeric_limits<double>::quiet_NaN()), ContractViolation);
    EXPECT_THROW(fitness(std::numeric_limits<double>::infinity()), ContractViolation);
}

TEST(ColonyConfigValidation, RejectsZeroes) {
    EXPECT_THROW(validate(config(0, 1)), ConfigError);
    EXPECT_THROW(validate(config(1, 0)), ConfigError);
    EXPECT_THROW(validate(config(1, 1, 0)), ConfigError);
}

TEST(CheckStop, Criteria) {
    SearchState<std::int64_t> s;
    s.candidates = {{1, 0.05, fitness(0.05), 0, 1, std::nullopt}};
    ColonyConfig c = config(1, 16);
    s.iteration = 16;
    EXPECT_TRUE(check_stop(s, c));
    s.iteration = 3;
    EXPECT_FALSE(check_stop(s, c));
    c.loss_threshold = 0.1;
    EXPECT_TRUE(check_stop(s, c));
    c.loss_threshold = 0.05;
    EXPECT_FALSE(check_stop(s, c));  // strict
}

TEST(Roulette, FrequenciesFollowFitness) {
    RandomSource rng(3);
    const double f[] = {0.8, 0.2};
    double hits = 0;
    for (int i = 0; i < 100000; ++i) hits += roulette(f, rng) == 0;
    EXPECT_TRUE(support::within_sigma(hits, 100000, 0.8));
}

TEST(Roulette, SingleCandidateAlwaysChosen) {
    RandomSource rng(4);
    const double f[] = {0.3};
    for (int i = 0; i < 1000; ++i) EXPECT_EQ(roulette(f, rng), 0u);
}

TEST(Roulette, EqualFitnessIsUniform) {
    RandomSource rng(5);
    const std::vector<double> f(5, 0.5);
    std::vector<double> counts(5);
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[roulette(f, rng)] += 1;
    double chi2 = 0;
    for (double c : counts) chi2 += (c - n / 5.0) * (c - n / 5.0) / (n / 5.0);
    EXPECT_LT(chi2, 18.47);  // chi-square, 4 dof, p = 0.001
}

TEST(Colony, ReplaceOnlyOnStrictImprovement) {
    // id 1: init 0.5; id 2: employed trial 0.4 (accepted); id 3: onlooker trial 0.4 (tie, rejected).
    SequenceEvaluator<std::int64_t> eval([](std::uint64_t id) { return id == 1 ? 0.5 : 0.4; });
    LineColony colony(config(1, 1), LineSpace{}, eval);
    std::vector<EvalRecord> log;
    colony.on_evaluation([&](const EvalRecord& r) { log.push_back(r); });
    auto state = colony.initialize();
    colony.step(state);
    ASSERT_EQ(log.size(), 3u);
    EXPECT_TRUE(log[1].accepted);
    EXPECT_FALSE(log[2].accepted);
    EXPECT_EQ(state.candidates[0].loss, 0.4);
    EXPECT_EQ(state.candidates[0].eval_id, 2u);
    EXPECT_EQ(state.candidates[0].exhaustion, 1u);
    EXPECT_EQ(state.candidates[0].fitness, fitness(0.4));
}

TEST(Colony, WorseTrialIncrementsExhaustion) {
    SequenceEvaluator<std::int64_t> eval([](std::uint64_t id) { return id == 1 ? 0.5 : 0.9; });
    LineColony colony(config(1, 3), LineSpace{}, eval);
    auto state = colony.initialize();
    colony.resume(state);
    EXPECT_EQ(state.candidates[0].loss, 0.5);
    EXPECT_EQ(state.candidates[0].exhaustion, 6u);
}

TEST(Colony, EvaluationCountForOneIteration) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(2, 1), LineSpace{}, eval);
    SearchState<std::int64_t> state;
    const auto finals = colony.run(state);
    EXPECT_EQ(state.evals_total, 6u);
    EXPECT_EQ(eval.calls(), 6u);
    EXPECT_GE(finals.size(), 1u);
    EXPECT_EQ(state.history.size(), 1u);
}

TEST(Colony, ExhaustionArchivalAndReinitialization) {
    // Constant loss: every trial ties, so candidates exhaust at a fixed pace.
    FunctionEvaluator<std::int64_t> eval([](const std::int64_t&) { return 1.0; });
    LineColony colony(config(3, 30, 10), LineSpace{}, eval);
    std::map<std::size_t, std::uint64_t> exhaustion;  // oracle rebuilt from the telemetry stream
    std::vector<EvalRecord> log;
    colony.on_evaluation([&](const EvalRecord& r) { log.push_back(r); });
    auto state = colony.initialize();
    for (const auto& r : log) exhaustion[r.slot] = 0;
    std::size_t seen = log.size();
    while (!colony.should_stop(state)) {
        colony.step(state);
        ASSERT_EQ(state.candidates.size(), 3u);
        for (; seen < log.size(); ++seen) {
            const auto& r = log[seen];
            if (r.phase == Phase::Reinit) {
                EXPECT_GE(exhaustion[r.slot], 10u);
                exhaustion[r.slot] = 0;
            } else {
                exhaustion[r.slot] = r.accepted ? 0 : exhaustion[r.slot] + 1;
            }
        }
        for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(state.candidates[i].exhaustion, exhaustion[i]);
        for (const auto& c : state.candidates) EXPECT_LT(c.exhaustion, 10u + 3u);
    }
    EXPECT_GT(state.archive.size(), 0u);
    for (const auto& a : state.archive) EXPECT_GE(a.exhaustion, 10u);
    std::size_t reinits = 0;
    for (const auto& r : log) reinits += r.phase == Phase::Reinit;
    EXPECT_EQ(reinits, state.archive.size());
}

TEST(Colony, NoExhaustionLimitKeepsArchiveEmpty) {
    FunctionEvaluator<std::int64_t> eval([](const std::int64_t&) { return 1.0; });
    LineColony colony(config(2, 20), LineSpace{}, eval);
    SearchState<std::int64_t> state;
    const auto finals = colony.run(state);
    EXPECT_TRUE(state.archive.empty());
    std::set<std::int64_t> pop;
    for (const auto& c : state.candidates) pop.insert(c.genome);
    EXPECT_EQ(finals.size(), pop.size());
}

TEST(Colony, FinalModelsAreDedupedUnionSortedByLoss) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(4, 25, 3, 9), LineSpace{}, eval);
    SearchState<std::int64_t> state;
    const auto finals = colony.run(state);
    ASSERT_FALSE(state.archive.empty());

    std::map<std::int64_t, double> expected;  // fingerprint -> lowest loss
    for (const auto* group : {&state.archive, &state.candidates})
        for (const auto& c : *group) {
            auto [it, inserted] = expected.emplace(c.genome, c.loss);
            if (!inserted) it->second = std::min(it->second, c.loss);
        }
    ASSERT_EQ(finals.size(), expected.size());
    for (std::size_t i = 0; i < finals.size(); ++i) {
        EXPECT_EQ(finals[i].loss, expected.at(finals[i].genome));
        if (i) EXPECT_LE(finals[i - 1].loss, finals[i].loss);
    }
}

TEST(Colony, BestSoFarNeverIncreases) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(4, 40, 4, 2), LineSpace{}, eval);
    SearchState<std::int64_t> state;
    colony.run(state);
    for (std::size_t i = 1; i < state.history.size(); ++i)
        EXPECT_LE(state.history[i].best_loss, state.history[i - 1].best_loss);
}

TEST(Colony, CandidateLossNonIncreasingBetweenReinits) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(3, 30, 5, 4), LineSpace{}, eval);
    auto state = colony.initialize();
    std::vector<double> last(3);
    for (std::size_t i = 0; i < 3; ++i) last[i] = state.candidates[i].loss;
    while (!colony.should_stop(state)) {
        const std::size_t archived = state.archive.size();
        colony.step(state);
        if (state.archive.size() != archived) {
            for (std::size_t i = 0; i < 3; ++i) last[i] = state.candidates[i].loss;
            continue;
        }
        for (std::size_t i = 0; i < 3; ++i) {
            EXPECT_LE(state.candidates[i].loss, last[i]);
            last[i] = state.candidates[i].loss;
        }
    }
}

TEST(Colony, CheckpointRestoreContinuesBitIdentically) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(4, 20, 5, 17), LineSpace{}, eval);
    SearchState<std::int64_t> straight;
    const auto expected = colony.run(straight);

    auto state = colony.initialize();
    for (int i = 0; i < 7; ++i) colony.step(state);
    const std::string text = colony.checkpoint(state).dump();
    auto restored = colony.restore(nlohmann::json::parse(text));
    EXPECT_EQ(restored, state);
    const auto finals = colony.resume(restored);
    EXPECT_EQ(restored, straight);
    EXPECT_EQ(finals, expected);
}

TEST(Colony, RestoreRejectsBadSnapshots) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(2, 3), LineSpace{}, eval);
    auto state = colony.initialize();
    auto snap = colony.checkpoint(state);

    auto versioned = snap;
    versioned["version"] = kCheckpointVersion + 1;
    EXPECT_THROW(colony.restore(versioned), VersionMismatch);

    auto truncated = snap;
    truncated.erase("candidates");
    EXPECT_THROW(colony.restore(truncated), CorruptSnapshot);

    auto bad_rng = snap;
    bad_rng["rng"] = "garbage";
    EXPECT_THROW(colony.restore(bad_rng), CorruptSnapshot);

    EXPECT_THROW(colony.restore(nlohmann::json::array()), CorruptSnapshot);

    LineColony bigger(config(3, 3), LineSpace{}, eval);
    EXPECT_THROW(bigger.restore(snap), CorruptSnapshot);
}

TEST(Colony, DeterministicUnderParallelEvaluation) {
    auto run_with = [](std::size_t workers) {
        FunctionEvaluator<std::int64_t> eval(bowl);
        ColonyConfig c = config(6, 15, 4, 23);
        c.parallel_evals = workers;
        LineColony colony(c, LineSpace{}, eval);
        std::vector<std::pair<std::uint64_t, std::int64_t>> log;
        std::vector<EvalRecord> records;
        colony.on_evaluation([&](const EvalRecord& r) { records.push_back(r); });
        SearchState<std::int64_t> state;
        colony.run(state);
        return std::make_pair(state, records.size());
    };
    const auto a = run_with(1);
    const auto b = run_with(4);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
}

TEST(Colony, FailedTrialsCountAsNonImprovement) {
    // Every trial after initialization fails.
    std::atomic<int> calls{0};
    FunctionEvaluator<std::int64_t> eval([&](const std::int64_t&) { return calls++ < 2 ? 1.0 : -1.0; });
    LineColony colony(config(2, 2), LineSpace{}, eval);
    SearchState<std::int64_t> state;
    colony.run(state);
    EXPECT_EQ(state.eval_failures, 8u);
    std::uint64_t total = 0;
    for (const auto& c : state.candidates) {
        EXPECT_EQ(c.loss, 1.0);
        total += c.exhaustion;
    }
    EXPECT_EQ(total, 8u);
}

TEST(Colony, InitializationGivesUpAfterRetries) {
    FunctionEvaluator<std::int64_t> eval([](const std::int64_t&) { return -1.0; });
    ColonyConfig c = config(2, 2);
    c.init_retries = 3;
    LineColony colony(c, LineSpace{}, eval);
    EXPECT_THROW(colony.initialize(), EvaluationFailed);
    EXPECT_EQ(eval.calls(), 6u);
}

TEST(Colony, InitializationRegeneratesFailedCandidates) {
    std::atomic<int> calls{0};
    FunctionEvaluator<std::int64_t> eval([&](const std::int64_t&) { return calls++ == 0 ? -1.0 : 2.0; });
    LineColony colony(config(2, 1), LineSpace{}, eval);
    const auto state = colony.initialize();
    EXPECT_EQ(state.candidates.size(), 2u);
    EXPECT_EQ(state.evals_total, 3u);
    EXPECT_EQ(state.eval_failures, 1u);
}

namespace {

class Misbehaving final : public Evaluator<std::int64_t> {
public:
    explicit Misbehaving(int mode) : mode_(mode) {}
    Evaluation evaluate(const std::int64_t&, std::uint64_t id) override {
        Evaluation r;
        r.request_id = mode_ == 0 ? id + 1 : id;
        r.val_loss = mode_ == 1 ? -1.0 : 1.0;
        if (mode_ == 2 && id > 2) throw std::runtime_error("trainer exploded");
        return r;
    }

private:
    int mode_;
};

}  // namespace

TEST(Colony, ContractViolations) {
    Misbehaving wrong_id(0), negative(1);
    EXPECT_THROW(LineColony(config(1, 1), LineSpace{}, wrong_id).initialize(), ContractViolation);
    EXPECT_THROW(LineColony(config(1, 1), LineSpace{}, negative).initialize(), ContractViolation);
}

TEST(Colony, AbortReportsPhaseBoundaryState) {
    Misbehaving exploding(2);
    LineColony colony(config(2, 5), LineSpace{}, exploding);
    std::optional<SearchState<std::int64_t>> boundary;
    colony.on_abort([&](const SearchState<std::int64_t>& s) { boundary = s; });
    auto state = colony.initialize();
    const auto before = state;
    EXPECT_THROW(colony.resume(state), std::runtime_error);
    ASSERT_TRUE(boundary.has_value());
    EXPECT_EQ(*boundary, before);
    EXPECT_EQ(state, before);
}

TEST(Colony, TelemetryRecordsPerIteration) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    LineColony colony(config(3, 5, 2), LineSpace{}, eval);
    std::vector<IterationRecord> records;
    colony.on_iteration([&](const SearchState<std::int64_t>&, const IterationRecord& r) { records.push_back(r); });
    SearchState<std::int64_t> state;
    colony.run(state);
    ASSERT_EQ(records.size(), 5u);
    EXPECT_EQ(records, state.history);
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(records[i].iteration, i + 1);
        EXPECT_LE(records[i].best_loss, records[i].mean_loss);
        EXPECT_LE(records[i].mean_loss, records[i].worst_loss);
    }
    EXPECT_EQ(records.back().evals_total, state.evals_total);
    EXPECT_EQ(LineColony::iteration_from_json(LineColony::to_json(records[2])), records[2]);
}

TEST(Colony, LossThresholdStopsEarly) {
    FunctionEvaluator<std::int64_t> eval(bowl);
    ColonyConfig c = config(4, 1000, std::nullopt, 3);
    c.loss_threshold = 0.05;
    LineColony colony(c, LineSpace{}, eval);
    SearchState<std::int64_t> state;
    colony.run(state);
    EXPECT_LT(state.iteration, 1000u);
    EXPECT_LT(min_loss<std::int64_t>(state.candidates), 0.05);
}
