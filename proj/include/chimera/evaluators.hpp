#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <mutex>
#include <unordered_map>

#include "chimera/genome_search.hpp"

namespace chimera {

/// Weighted structural distance between two layer stacks, compared position by position:
///   |layer count difference|
///   + 1.0 per position whose kinds differ
///   + 0.1 per axis whose kernel sizes differ
///   + 0.05 per axis whose paddings differ
/// Strides, weight seeds and metadata are not compared.
double landscape_distance(const Genome& query, const Genome& target);

/// Training-free evaluator whose validation loss is the distance to a hidden target.
class SurrogateLandscape final : public GenomeEvaluator {
public:
    explicit SurrogateLandscape(Genome target, std::optional<TrainingBudget> budget = std::nullopt);

    Evaluation evaluate_request(const EvaluationRequest& request) override;
    const Genome& target() const { return target_; }

private:
    Genome target_;
};

/// Random target with exactly `layers` layers, deterministic in `seed`.
/// Throws GenerationExhausted when the bounds cannot produce one.
Genome make_surrogate_target(const SearchBounds& bounds, int layers, std::uint64_t seed);

/// Answers every request with the same loss; chosen_lr is the geometric mean of the bounds.
class ConstantEvaluator final : public GenomeEvaluator {
public:
    explicit ConstantEvaluator(double loss, std::optional<TrainingBudget> budget = std::nullopt)
        : GenomeEvaluator(budget), loss_(loss) {}

    Evaluation evaluate_request(const EvaluationRequest& request) override;

private:
    double loss_;
};

/// Memoizes an inner evaluator by genome fingerprint. Concurrent requests for the same
/// genome wait for a single inner evaluation.
class CachingEvaluator final : public GenomeEvaluator {
public:
    explicit CachingEvaluator(GenomeEvaluator& inner, bool enabled = true);

    Evaluation evaluate_request(const EvaluationRequest& request) override;

    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    bool enabled() const { return enabled_; }

private:
    GenomeEvaluator* inner_;
    bool enabled_;
    std::mutex mutex_;
    std::unordered_map<std::uint64_t, std::shared_future<Evaluation>> cache_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

/// Passes requests through and keeps every response, keyed by request id.
class RecordingEvaluator final : public GenomeEvaluator {
public:
    explicit RecordingEvaluator(GenomeEvaluator& inner) : inner_(&inner) {}

    Evaluation evaluate_request(const EvaluationRequest& request) override;

    std::map<std::uint64_t, Evaluation> log() const;
    /// One protocol result message per line, ordered by request id.
    void save(const std::filesystem::path& path) const;

private:
    GenomeEvaluator* inner_;
    mutable std::mutex mutex_;
    std::map<std::uint64_t, Evaluation> log_;
};

/// Serves responses from a recorded log. An unknown request id is a ContractViolation.
class ReplayEvaluator final : public GenomeEvaluator {
public:
    explicit ReplayEvaluator(std::map<std::uint64_t, Evaluation> log) : log_(std::move(log)) {}
    static ReplayEvaluator load(const std::filesystem::path& path);

    Evaluation evaluate_request(const EvaluationRequest& request) override;

private:
    std::map<std::uint64_t, Evaluation> log_;
};

}  // namespace chimera
