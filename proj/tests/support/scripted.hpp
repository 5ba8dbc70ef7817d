#pragma once

// Toy search space and scripted evaluators for exercising the colony in isolation.

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <utility>

#include <json.hpp>

#include "chimera/colony.hpp"

namespace chimera::support {

/// Integers on [0, 1000); a trial moves the parent by -3..3.
struct LineSpace {
    using genome_type = std::int64_t;

    std::int64_t random(RandomSource& rng) const { return rng.uniform_int(0, 999); }
    std::int64_t mutate(std::int64_t parent, std::uint64_t, RandomSource& rng) const {
        return parent + rng.uniform_int(-3, 3);
    }
    std::uint64_t fingerprint(std::int64_t g) const { return static_cast<std::uint64_t>(g); }
    nlohmann::json to_json(std::int64_t g) const { return g; }
    std::int64_t from_json(const nlohmann::json& j) const { return j.get<std::int64_t>(); }
};

/// Loss given by a pure function of the genome; failure when the function returns a negative value.
template <typename G>
class FunctionEvaluator final : public Evaluator<G> {
public:
    explicit FunctionEvaluator(std::function<double(const G&)> loss) : loss_(std::move(loss)) {}

    Evaluation evaluate(const G& genome, std::uint64_t request_id) override {
        ++calls_;
        Evaluation r;
        r.request_id = request_id;
        const double loss = loss_(genome);
        if (loss < 0.0) {
            r.status = EvalStatus::TrainFailed;
            r.message = "scripted failure";
        } else {
            r.val_loss = loss;
            r.train_loss = loss;
        }
        return r;
    }

    std::uint64_t calls() const { return calls_; }

private:
    std::function<double(const G&)> loss_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Loss keyed by request id, so the engine sees an arbitrary predetermined sequence.
template <typename G>
class SequenceEvaluator final : public Evaluator<G> {
public:
    explicit SequenceEvaluator(std::function<double(std::uint64_t)> by_id) : by_id_(std::move(by_id)) {}

    Evaluation evaluate(const G&, std::uint64_t request_id) override {
        Evaluation r;
        r.request_id = request_id;
        r.val_loss = by_id_(request_id);
        r.train_loss = r.val_loss;
        return r;
    }

private:
    std::function<double(std::uint64_t)> by_id_;
};

}  // namespace chimera::support
