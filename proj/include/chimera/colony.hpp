#pragma once

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chimera/errors.hpp"
#include "chimera/evaluation.hpp"
#include "chimera/parallel.hpp"
#include "chimera/random.hpp"

namespace chimera {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "chimera-checkpoint";

/// What the colony needs from a genome representation.
///
/// Optional hooks, detected at compile time:
///   void inherit(G& child, const Candidate<G>& parent) const   parent -> trial bookkeeping
///   void check(const G& genome, const Evaluation& e) const     throws ContractViolation
template <typename S>
concept SearchSpace = requires(const S& space, const typename S::genome_type& genome, RandomSource& rng,
                               std::uint64_t exhaustion, const nlohmann::json& record) {
    typename S::genome_type;
    { space.random(rng) } -> std::same_as<typename S::genome_type>;
    { space.mutate(genome, exhaustion, rng) } -> std::same_as<typename S::genome_type>;
    { space.fingerprint(genome) } -> std::convertible_to<std::uint64_t>;
    { space.to_json(genome) } -> std::convertible_to<nlohmann::json>;
    { space.from_json(record) } -> std::same_as<typename S::genome_type>;
};

/// A food source: one genome with its validation loss and exhaustion counter.
template <typename G>
struct Candidate {
    G genome;
    double loss = 0.0;
    double fitness = 1.0;
    std::uint64_t exhaustion = 0;
    std::uint64_t eval_id = 0;
    std::optional<double> chosen_lr;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ColonyConfig {
    std::size_t population_size = 4;
    std::uint64_t max_iter = 16;
    std::optional<double> loss_threshold;
    std::optional<std::uint64_t> max_exhaustion;  // unset: candidates are never archived mid-run
    std::uint64_t rng_seed = 0;
    std::size_t parallel_evals = 1;
    int init_retries = 16;  // fresh candidates whose evaluation fails are regenerated this often
};

inline void validate(const ColonyConfig& cfg) {
    if (cfg.population_size < 1) throw ConfigError("engine.population_size", "must be >= 1");
    if (cfg.max_iter < 1) throw ConfigError("engine.max_iter", "must be >= 1");
    if (cfg.loss_threshold && !(*cfg.loss_threshold >= 0.0))
        throw ConfigError("engine.loss_threshold", "must be non-negative");
    if (cfg.max_exhaustion && *cfg.max_exhaustion < 1) throw ConfigError("engine.max_exhaustion", "must be >= 1");
    if (cfg.parallel_evals < 1) throw ConfigError("engine.parallel_evals", "must be >= 1");
    if (cfg.init_retries < 1) throw ConfigError("engine.init_retries", "must be >= 1");
}

enum class Phase : std::uint8_t { Init, Employed, Onlooker, Reinit };

inline const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::Init: return "init";
        case Phase::Employed: return "employed";
        case Phase::Onlooker: return "onlooker";
        case Phase::Reinit: return "reinit";
    }
    return "unknown";
}

/// One line of the per-evaluation telemetry stream.
struct EvalRecord {
    std::uint64_t request_id = 0;
    std::uint64_t iteration = 0;
    Phase phase = Phase::Init;
    std::size_t slot = 0;
    std::uint64_t fingerprint = 0;
    Evaluation result;
    bool accepted = false;
};

struct IterationRecord {
    std::uint64_t iteration = 0;
    double best_loss = 0.0;   // over archive and population: never increases
    double mean_loss = 0.0;   // population
    double worst_loss = 0.0;  // population
    std::size_t archive_size = 0;
    std::uint64_t evals_total = 0;

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

template <typename G>
struct SearchState {
    std::vector<Candidate<G>> candidates;
    std::vector<Candidate<G>> archive;
    std::uint64_t iteration = 0;
    RandomSource rng;
    std::uint64_t next_request_id = 1;
    std::uint64_t evals_total = 0;
    std::uint64_t eval_failures = 0;
    std::vector<IterationRecord> history;

    friend bool operator==(const SearchState&, const SearchState&) = default;
};

/// Fitness-proportional pick over `fitness` (all positive).
inline std::size_t roulette(std::span<const double> fitness, RandomSource& rng) {
    double total = 0.0;
    for (double f : fitness) total += f;
    double target = rng.uniform01() * total;
    for (std::size_t i = 0; i < fitness.size(); ++i) {
        if (target < fitness[i]) return i;
        target -= fitness[i];
    }
    return fitness.size() - 1;
}

template <typename G>
double min_loss(std::span<const Candidate<G>> candidates) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : candidates) best = std::min(best, c.loss);
    return best;
}

template <typename G>
bool check_stop(const SearchState<G>& state, const ColonyConfig& cfg) {
    if (state.iteration >= cfg.max_iter) return true;
    return cfg.loss_threshold && min_loss<G>(state.candidates) < *cfg.loss_threshold;
}

/// Artificial-bee-colony search: employed phase (one trial per candidate, archive and
/// reinitialize on exhaustion) then onlooker phase (roulette-selected trials), repeated
/// until the iteration budget or loss threshold is reached.
///
/// Randomness is drawn only on the calling thread; evaluations of a phase run concurrently
/// and are applied afterwards in index order, so results do not depend on scheduling.
template <SearchSpace S>
class Colony {
public:
    using genome_type = typename S::genome_type;
    using candidate_type = Candidate<genome_type>;
    using state_type = SearchState<genome_type>;

    Colony(ColonyConfig config, S space, Evaluator<genome_type>& evaluator,
           std::optional<genome_type> seed_genome = std::nullopt)
        : config_(std::move(config)), space_(std::move(space)), evaluator_(&evaluator),
          seed_genome_(std::move(seed_genome)) {
        validate(config_);
    }

    const ColonyConfig& config() const { return config_; }
    const S& space() const { return space_; }

    void on_evaluation(std::function<void(const EvalRecord&)> sink) { eval_sink_ = std::move(sink); }
    void on_iteration(std::function<void(const state_type&, const IterationRecord&)> sink) {
        iteration_sink_ = std::move(sink);
    }
    /// Called with the last phase-boundary state before an unrecoverable error propagates.
    void on_abort(std::function<void(const state_type&)> sink) { abort_sink_ = std::move(sink); }

    state_type initialize() const {
        state_type state;
        state.rng = RandomSource(config_.rng_seed);
        const std::size_t n = config_.population_size;
        std::vector<std::function<genome_type(RandomSource&)>> makers;
        makers.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!seed_genome_) {
                makers.emplace_back([this](RandomSource& rng) { return space_.random(rng); });
            } else if (i == 0) {
                makers.emplace_back([this](RandomSource&) { return *seed_genome_; });
            } else {
                makers.emplace_back([this](RandomSource& rng) { return space_.mutate(*seed_genome_, 0, rng); });
            }
        }
        std::vector<std::size_t> slots(n);
        for (std::size_t i = 0; i < n; ++i) slots[i] = i;
        state.candidates = fresh_candidates(state, makers, slots, Phase::Init);
        return state;
    }

    void employed_phase(state_type& state) const {
        const std::size_t n = state.candidates.size();
        std::vector<genome_type> trials;
        trials.reserve(n);
        for (std::size_t i = 0; i < n; ++i) trials.push_back(make_trial(state.candidates[i], state.rng));
        std::vector<std::size_t> targets(n);
        for (std::size_t i = 0; i < n; ++i) targets[i] = i;
        contest(state, trials, targets, Phase::Employed);

        if (!config_.max_exhaustion) return;
        std::vector<std::size_t> exhausted;
        for (std::size_t i = 0; i < n; ++i)
            if (state.candidates[i].exhaustion >= *config_.max_exhaustion) exhausted.push_back(i);
        if (exhausted.empty()) return;

        for (std::size_t i : exhausted) state.archive.push_back(state.candidates[i]);
        std::vector<std::function<genome_type(RandomSource&)>> makers(
            exhausted.size(), [this](RandomSource& rng) { return space_.random(rng); });
        auto fresh = fresh_candidates(state, makers, exhausted, Phase::Reinit);
        for (std::size_t k = 0; k < exhausted.size(); ++k) state.candidates[exhausted[k]] = std::move(fresh[k]);
    }

    void onlooker_phase(state_type& state) const {
        const std::size_t n = state.candidates.size();
        std::vector<double> weights(n);
        for (std::size_t i = 0; i < n; ++i) weights[i] = state.candidates[i].fitness;
        std::vector<std::size_t> targets(n);
        for (std::size_t k = 0; k < n; ++k) targets[k] = roulette(weights, state.rng);

        std::vector<genome_type> trials;
        trials.reserve(n);
        for (std::size_t k = 0; k < n; ++k) trials.push_back(make_trial(state.candidates[targets[k]], state.rng));
        contest(state, trials, targets, Phase::Onlooker);
    }

    /// One employed phase, one onlooker phase, then a telemetry record.
    void step(state_type& state) const {
        employed_phase(state);
        onlooker_phase(state);
        ++state.iteration;
        const IterationRecord record = summarize(state);
        state.history.push_back(record);
        if (iteration_sink_) iteration_sink_(state, record);
    }

    bool should_stop(const state_type& state) const { return check_stop(state, config_); }

    /// Continues `state` until a stop criterion holds and returns the final models.
    std::vector<candidate_type> resume(state_type& state) const {
        while (!should_stop(state)) {
            state_type boundary = state;
            try {
                step(state);
            } catch (...) {
                if (abort_sink_) abort_sink_(boundary);
                state = std::move(boundary);
                throw;
            }
        }
        return final_models(state);
    }

    std::vector<candidate_type> run() const {
        state_type state = initialize();
        return resume(state);
    }

    std::vector<candidate_type> run(state_type& state) const {
        state = initialize();
        return resume(state);
    }

    /// Archive and population merged, deduplicated by fingerprint (lowest loss kept),
    /// sorted by ascending loss.
    std::vector<candidate_type> final_models(const state_type& state) const {
        std::vector<candidate_type> all;
        all.reserve(state.archive.size() + state.candidates.size());
        all.insert(all.end(), state.archive.begin(), state.archive.end());
        all.insert(all.end(), state.candidates.begin(), state.candidates.end());
        std::stable_sort(all.begin(), all.end(),
                         [](const candidate_type& a, const candidate_type& b) { return a.loss < b.loss; });
        std::vector<candidate_type> out;
        std::unordered_set<std::uint64_t> seen;
        for (auto& c : all)
            if (seen.insert(space_.fingerprint(c.genome)).second) out.push_back(std::move(c));
        return out;
    }

    nlohmann::json checkpoint(const state_type& state) const {
        auto cand = [this](const candidate_type& c) {
            nlohmann::json j{{"genome", space_.to_json(c.genome)},
                             {"loss", c.loss},
                             {"fitness", c.fitness},
                             {"exhaustion", c.exhaustion},
                             {"eval_id", c.eval_id}};
            if (c.chosen_lr) j["chosen_lr"] = *c.chosen_lr;
            return j;
        };
        nlohmann::json candidates = nlohmann::json::array(), archive = nlohmann::json::array(),
                       history = nlohmann::json::array();
        for (const auto& c : state.candidates) candidates.push_back(cand(c));
        for (const auto& c : state.archive) archive.push_back(cand(c));
        for (const auto& h : state.history) history.push_back(to_json(h));
        return {{"format", kCheckpointFormat},
                {"version", kCheckpointVersion},
                {"iteration", state.iteration},
                {"rng", state.rng.save()},
                {"next_request_id", state.next_request_id},
                {"evals_total", state.evals_total},
                {"eval_failures", state.eval_failures},
                {"candidates", std::move(candidates)},
                {"archive", std::move(archive)},
                {"history", std::move(history)}};
    }

    /// Throws VersionMismatch for a foreign version tag and CorruptSnapshot for anything unreadable.
    state_type restore(const nlohmann::json& snapshot) const {
        if (!snapshot.is_object() || snapshot.value("format", std::string{}) != kCheckpointFormat)
            throw CorruptSnapshot("not a checkpoint snapshot");
        if (!snapshot.contains("version") || snapshot.at("version") != kCheckpointVersion)
            throw VersionMismatch("checkpoint version " + snapshot.value("version", nlohmann::json{}).dump() +
                                  " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
        try {
            state_type state;
            state.iteration = snapshot.at("iteration").get<std::uint64_t>();
            state.rng = RandomSource::restore(snapshot.at("rng").get<std::string>());
            state.next_request_id = snapshot.at("next_request_id").get<std::uint64_t>();
            state.evals_total = snapshot.at("evals_total").get<std::uint64_t>();
            state.eval_failures = snapshot.at("eval_failures").get<std::uint64_t>();
            auto cand = [this](const nlohmann::json& j) {
                candidate_type c{space_.from_json(j.at("genome")), j.at("loss").get<double>(),
                                 j.at("fitness").get<double>(), j.at("exhaustion").get<std::uint64_t>(),
                                 j.at("eval_id").get<std::uint64_t>(), std::nullopt};
                if (j.contains("chosen_lr")) c.chosen_lr = j.at("chosen_lr").get<double>();
                return c;
            };
            for (const auto& j : snapshot.at("candidates")) state.candidates.push_back(cand(j));
            for (const auto& j : snapshot.at("archive")) state.archive.push_back(cand(j));
            for (const auto& j : snapshot.at("history")) state.history.push_back(iteration_from_json(j));
            if (state.candidates.size() != config_.population_size)
                throw CorruptSnapshot("population size does not match the configuration");
            return state;
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw CorruptSnapshot(std::string("unreadable checkpoint: ") + e.what());
        }
    }

    static nlohmann::json to_json(const IterationRecord& r) {
        return {{"iteration", r.iteration},       {"best_loss", r.best_loss},     {"mean_loss", r.mean_loss},
                {"worst_loss", r.worst_loss},     {"archive_size", r.archive_size}, {"evals_total", r.evals_total}};
    }

    static IterationRecord iteration_from_json(const nlohmann::json& j) {
        return {j.at("iteration").get<std::uint64_t>(), j.at("best_loss").get<double>(),
                j.at("mean_loss").get<double>(),        j.at("worst_loss").get<double>(),
                j.at("archive_size").get<std::size_t>(), j.at("evals_total").get<std::uint64_t>()};
    }

private:
    genome_type make_trial(const candidate_type& parent, RandomSource& rng) const {
        genome_type trial = space_.mutate(parent.genome, parent.exhaustion, rng);
        if constexpr (requires { space_.inherit(trial, parent); }) space_.inherit(trial, parent);
        return trial;
    }

    std::vector<Evaluation> evaluate_batch(state_type& state, std::span<const genome_type> genomes) const {
        std::vector<std::uint64_t> ids(genomes.size());
        for (auto& id : ids) id = state.next_request_id++;
        std::vector<Evaluation> results(genomes.size());
        parallel_for(genomes.size(), config_.parallel_evals,
                     [&](std::size_t i) { results[i] = evaluator_->evaluate(genomes[i], ids[i]); });
        state.evals_total += genomes.size();
        for (std::size_t i = 0; i < genomes.size(); ++i) {
            Evaluation& r = results[i];
            if (r.request_id != ids[i])
                throw ContractViolation("evaluator answered request " + std::to_string(ids[i]) + " with id " +
                                        std::to_string(r.request_id));
            if (r.ok()) {
                fitness(r.val_loss);  // validates the loss
                if constexpr (requires { space_.check(genomes[i], r); }) space_.check(genomes[i], r);
            } else {
                ++state.eval_failures;
            }
        }
        return results;
    }

    void emit(const state_type& state, Phase phase, std::size_t slot, const genome_type& genome,
              const Evaluation& result, bool accepted) const {
        if (!eval_sink_) return;
        eval_sink_(EvalRecord{result.request_id, state.iteration, phase, slot, space_.fingerprint(genome), result,
                              accepted});
    }

    // Evaluates each trial against the candidate at targets[k], in order.
    void contest(state_type& state, std::vector<genome_type>& trials, std::span<const std::size_t> targets,
                 Phase phase) const {
        const auto results = evaluate_batch(state, trials);
        for (std::size_t k = 0; k < trials.size(); ++k) {
            candidate_type& incumbent = state.candidates[targets[k]];
            const Evaluation& r = results[k];
            const bool improved = r.ok() && r.val_loss < incumbent.loss;
            emit(state, phase, targets[k], trials[k], r, improved);
            if (improved) {
                incumbent = candidate_type{std::move(trials[k]), r.val_loss, fitness(r.val_loss), 0, r.request_id,
                                           r.chosen_lr};
            } else {
                ++incumbent.exhaustion;
            }
        }
    }

    // Builds and evaluates one candidate per maker; failed evaluations are regenerated.
    std::vector<candidate_type> fresh_candidates(state_type& state,
                                                 std::span<const std::function<genome_type(RandomSource&)>> makers,
                                                 std::span<const std::size_t> slots, Phase phase) const {
        std::vector<std::optional<candidate_type>> out(makers.size());
        std::vector<std::size_t> pending(makers.size());
        for (std::size_t i = 0; i < pending.size(); ++i) pending[i] = i;
        for (int round = 0; !pending.empty(); ++round) {
            if (round >= config_.init_retries)
                throw EvaluationFailed("could not obtain a successful evaluation for a fresh candidate after " +
                                       std::to_string(config_.init_retries) + " attempts");
            std::vector<genome_type> genomes;
            genomes.reserve(pending.size());
            for (std::size_t i : pending) genomes.push_back(makers[i](state.rng));
            const auto results = evaluate_batch(state, genomes);
            std::vector<std::size_t> still;
            for (std::size_t k = 0; k < pending.size(); ++k) {
                const Evaluation& r = results[k];
                emit(state, phase, slots[pending[k]], genomes[k], r, r.ok());
                if (r.ok())
                    out[pending[k]] =
                        candidate_type{std::move(genomes[k]), r.val_loss, fitness(r.val_loss), 0, r.request_id,
                                       r.chosen_lr};
                else
                    still.push_back(pending[k]);
            }
            pending = std::move(still);
        }
        std::vector<candidate_type> result;
        result.reserve(out.size());
        for (auto& c : out) result.push_back(std::move(*c));
        return result;
    }

    IterationRecord summarize(const state_type& state) const {
        IterationRecord r;
        r.iteration = state.iteration;
        r.best_loss = std::min(min_loss<genome_type>(state.candidates), min_loss<genome_type>(state.archive));
        double sum = 0.0, worst = 0.0;
        for (const auto& c : state.candidates) {
            sum += c.loss;
            worst = std::max(worst, c.loss);
        }
        r.mean_loss = sum / static_cast<double>(state.candidates.size());
        r.worst_loss = worst;
        r.archive_size = state.archive.size();
        r.evals_total = state.evals_total;
        return r;
    }

    ColonyConfig config_;
    S space_;
    Evaluator<genome_type>* evaluator_;
    std::optional<genome_type> seed_genome_;
    std::function<void(const EvalRecord&)> eval_sink_;
    std::function<void(const state_type&, const IterationRecord&)> iteration_sink_;
    std::function<void(const state_type&)> abort_sink_;
};

}  // namespace chimera
