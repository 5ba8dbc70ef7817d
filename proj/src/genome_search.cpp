#include "chimera/genome_search.hpp"

#include <string>

namespace chimera {

EvaluationRequest make_request(const Genome& genome, std::uint64_t request_id, std::optional<TrainingBudget> budget) {
    const LrBounds lr = lr_bounds(genome.lr_hint);
    return {request_id, genome, lr.low, lr.high, budget};
}

GenomeSpace::GenomeSpace(SearchBounds bounds, MutationConfig mutation)
    : bounds_(std::move(bounds)), mutation_(mutation) {
    validate(bounds_);
    validate(mutation_);
}

void GenomeSpace::check(const Genome& genome, const Evaluation& result) const {
    if (!result.ok()) return;
    const LrBounds lr = lr_bounds(genome.lr_hint);
    if (!result.chosen_lr)
        throw ContractViolation("request " + std::to_string(result.request_id) + ": ok result without chosen_lr");
    const double chosen = *result.chosen_lr;
    if (!(chosen >= lr.low && chosen <= lr.high))
        throw ContractViolation("request " + std::to_string(result.request_id) + ": chosen_lr " +
                                std::to_string(chosen) + " outside [" + std::to_string(lr.low) + ", " +
                                std::to_string(lr.high) + "]");
}

std::string to_string(EvalStatus status) {
    switch (status) {
        case EvalStatus::Ok: return "ok";
        case EvalStatus::TrainFailed: return "train_failed";
        case EvalStatus::Invalid: return "invalid";
    }
    return "unknown";
}

EvalStatus eval_status_from_string(const std::string& name) {
    if (name == "ok") return EvalStatus::Ok;
    if (name == "train_failed") return EvalStatus::TrainFailed;
    if (name == "invalid") return EvalStatus::Invalid;
    throw SchemaError("unknown status '" + name + "'");
}

}  // namespace chimera
