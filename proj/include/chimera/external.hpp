#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "chimera/genome_search.hpp"

namespace chimera {

struct ExternalCommand {
    std::vector<std::string> argv;  // argv[0] is looked up on PATH
    std::chrono::milliseconds timeout{std::chrono::hours(1)};
    std::size_t workers = 1;
};

/// Evaluator backed by a pool of trainer processes speaking the line protocol in
/// chimera/protocol.hpp over their standard streams. One request in flight per worker.
///
/// A timeout, worker death or protocol error turns the request into TrainFailed and
/// the worker is restarted. Construction launches every worker and checks its hello;
/// failures there throw SpawnFailed (or VersionMismatch for a foreign protocol).
class ExternalProcessEvaluator final : public GenomeEvaluator {
public:
    explicit ExternalProcessEvaluator(ExternalCommand command, std::optional<TrainingBudget> budget = std::nullopt);
    ~ExternalProcessEvaluator() override;

    ExternalProcessEvaluator(const ExternalProcessEvaluator&) = delete;
    ExternalProcessEvaluator& operator=(const ExternalProcessEvaluator&) = delete;

    Evaluation evaluate_request(const EvaluationRequest& request) override;

    std::size_t restarts() const;
    std::size_t protocol_errors() const;

    class Worker;

private:
    Worker* acquire();
    void release(Worker* worker);

    ExternalCommand command_;
    std::vector<std::unique_ptr<Worker>> workers_;
    std::vector<Worker*> idle_;
    mutable std::mutex mutex_;
    std::condition_variable available_;
    std::size_t restarts_ = 0;
    std::size_t protocol_errors_ = 0;
};

}  // namespace chimera
