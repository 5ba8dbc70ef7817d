#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "chimera/errors.hpp"

namespace chimera {

enum class EvalStatus : std::uint8_t { Ok, TrainFailed, Invalid };

std::string to_string(EvalStatus status);
EvalStatus eval_status_from_string(const std::string& name);

/// What any evaluator returns for one request.
struct Evaluation {
    std::uint64_t request_id = 0;
    EvalStatus status = EvalStatus::Ok;
    double val_loss = 0.0;             // meaningful iff status == Ok
    double train_loss = 0.0;           // informational
    std::optional<double> chosen_lr;   // present iff status == Ok for learning-rate aware evaluators
    double wall_seconds = 0.0;         // informational
    std::string message;               // failure detail, never interpreted

    bool ok() const { return status == EvalStatus::Ok; }

    friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

/// Black-box evaluation contract. Implementations must be safe to call concurrently.
template <typename G>
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual Evaluation evaluate(const G& genome, std::uint64_t request_id) = 0;
};

/// Bee-colony fitness (1 + L)^-1. Throws ContractViolation for negative or non-finite loss.
inline double fitness(double loss) {
    if (!std::isfinite(loss) || loss < 0.0)
        throw ContractViolation("evaluator reported an invalid loss " + std::to_string(loss));
    return 1.0 / (1.0 + loss);
}

}  // namespace chimera
