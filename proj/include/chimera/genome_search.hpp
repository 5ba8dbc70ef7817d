#pragma once

#include <cstdint>
#include <optional>

#include "chimera/colony.hpp"
#include "chimera/evaluation.hpp"
#include "chimera/genome.hpp"
#include "chimera/mutation.hpp"

namespace chimera {

struct TrainingBudget {
    int max_epochs = 20;
    int patience = 5;

    friend bool operator==(const TrainingBudget&, const TrainingBudget&) = default;
};

struct LrBounds {
    double low = 0.0;
    double high = 0.0;
};

/// One decade either side of the parent's learning rate.
inline LrBounds lr_bounds(double hint) {
    const double high = hint * 10.0;
    return {high / 100.0, high};
}

struct EvaluationRequest {
    std::uint64_t request_id = 0;
    Genome genome;
    double lr_low = 0.0;
    double lr_high = 0.0;
    std::optional<TrainingBudget> budget;
};

EvaluationRequest make_request(const Genome& genome, std::uint64_t request_id,
                               std::optional<TrainingBudget> budget = std::nullopt);

/// Base for evaluators of CNN genomes: turns (genome, id) into a request whose
/// learning-rate bounds come from the genome's lr_hint.
class GenomeEvaluator : public Evaluator<Genome> {
public:
    explicit GenomeEvaluator(std::optional<TrainingBudget> budget = std::nullopt) : budget_(budget) {}

    Evaluation evaluate(const Genome& genome, std::uint64_t request_id) final {
        return evaluate_request(make_request(genome, request_id, budget_));
    }

    virtual Evaluation evaluate_request(const EvaluationRequest& request) = 0;

    const std::optional<TrainingBudget>& budget() const { return budget_; }
    void set_budget(std::optional<TrainingBudget> budget) { budget_ = budget; }

private:
    std::optional<TrainingBudget> budget_;
};

/// Binds the CNN genome operators to the colony.
class GenomeSpace {
public:
    using genome_type = Genome;

    GenomeSpace(SearchBounds bounds, MutationConfig mutation);

    const SearchBounds& bounds() const { return bounds_; }
    const MutationConfig& mutation() const { return mutation_; }

    Genome random(RandomSource& rng) const { return random_genome(bounds_, rng); }
    Genome mutate(const Genome& parent, std::uint64_t exhaustion, RandomSource& rng) const {
        return chimera::mutate(parent, exhaustion, mutation_, bounds_, rng);
    }
    std::uint64_t fingerprint(const Genome& genome) const { return genome_fingerprint(genome); }
    nlohmann::json to_json(const Genome& genome) const { return chimera::to_json(genome); }
    Genome from_json(const nlohmann::json& record) const { return genome_from_json(record); }

    /// The trial's learning-rate anchor is the rate its parent was trained with.
    void inherit(Genome& child, const Candidate<Genome>& parent) const {
        if (parent.chosen_lr) child.lr_hint = *parent.chosen_lr;
    }

    /// Ok results must carry a chosen_lr inside the transmitted bounds.
    void check(const Genome& genome, const Evaluation& result) const;

private:
    SearchBounds bounds_;
    MutationConfig mutation_;
};

using GenomeColony = Colony<GenomeSpace>;

}  // namespace chimera
