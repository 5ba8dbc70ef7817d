#include "chimera/evaluators.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

#include "chimera/protocol.hpp"

namespace chimera {

namespace {

// Substitution cost of `a` for `b`, in twentieths.
long long substitution_units(const LayerSpec& a, const LayerSpec& b) {
    if (a.kind != b.kind) return 20;
    if (a.is_activation()) return 0;
    long long units = 0;
    for (Axis axis : kAxes) {
        if (a.kernel[axis] != b.kernel[axis]) units += 2;
        if (a.padding[axis] != b.padding[axis]) units += 1;
    }
    return units;
}

}  // namespace

double landscape_distance(const Genome& query, const Genome& target) {
    // Accumulated in twentieths so equal distances compare equal.
    const auto& a = query.layers;
    const auto& b = target.layers;
    const std::size_t common = std::min(a.size(), b.size());
    long long units = 20LL * std::abs(static_cast<long long>(a.size()) - static_cast<long long>(b.size()));
    for (std::size_t i = 0; i < common; ++i) units += substitution_units(a[i], b[i]);
    return static_cast<double>(units) / 20.0;
}

SurrogateLandscape::SurrogateLandscape(Genome target, std::optional<TrainingBudget> budget)
    : GenomeEvaluator(budget), target_(std::move(target)) {}

Evaluation SurrogateLandscape::evaluate_request(const EvaluationRequest& request) {
    Evaluation result;
    result.request_id = request.request_id;
    result.val_loss = landscape_distance(request.genome, target_);
    result.train_loss = result.val_loss;
    result.chosen_lr = request.genome.lr_hint;
    return result;
}

Genome make_surrogate_target(const SearchBounds& bounds, int layers, std::uint64_t seed) {
    SearchBounds wide = bounds;
    wide.max_layers = std::max(bounds.max_layers, layers);
    RandomSource rng(seed);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        Genome g = random_genome(wide, rng);
        if (static_cast<int>(g.layers.size()) == layers) {
            g.lineage_id = "target";
            return g;
        }
    }
    throw GenerationExhausted("no " + std::to_string(layers) + "-layer target found for these bounds");
}

Evaluation ConstantEvaluator::evaluate_request(const EvaluationRequest& request) {
    Evaluation result;
    result.request_id = request.request_id;
    result.val_loss = loss_;
    result.train_loss = loss_;
    result.chosen_lr = std::sqrt(request.lr_low * request.lr_high);
    return result;
}

CachingEvaluator::CachingEvaluator(GenomeEvaluator& inner, bool enabled)
    : GenomeEvaluator(inner.budget()), inner_(&inner), enabled_(enabled) {}

Evaluation CachingEvaluator::evaluate_request(const EvaluationRequest& request) {
    if (!enabled_) {
        ++misses_;
        return inner_->evaluate_request(request);
    }
    const std::uint64_t key = genome_fingerprint(request.genome);
    std::promise<Evaluation> promise;
    std::shared_future<Evaluation> future;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(key);
        if (it == cache_.end()) {
            future = promise.get_future().share();
            cache_.emplace(key, future);
            owner = true;
        } else {
            future = it->second;
        }
    }
    if (owner) {
        ++misses_;
        try {
            Evaluation result = inner_->evaluate_request(request);
            promise.set_value(result);
            if (!result.ok()) {
                // Failures may be transient; do not pin them.
                std::lock_guard lock(mutex_);
                cache_.erase(key);
            }
            return result;
        } catch (...) {
            promise.set_exception(std::current_exception());
            std::lock_guard lock(mutex_);
            cache_.erase(key);
            throw;
        }
    }
    ++hits_;
    Evaluation result = future.get();
    result.request_id = request.request_id;
    return result;
}

Evaluation RecordingEvaluator::evaluate_request(const EvaluationRequest& request) {
    Evaluation result = inner_->evaluate_request(request);
    std::lock_guard lock(mutex_);
    log_[request.request_id] = result;
    return result;
}

std::map<std::uint64_t, Evaluation> RecordingEvaluator::log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void RecordingEvaluator::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    for (const auto& [id, result] : log()) out << protocol::encode_result(result).dump() << '\n';
}

ReplayEvaluator ReplayEvaluator::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot open response log " + path.string());
    std::map<std::uint64_t, Evaluation> log;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Evaluation r = protocol::decode_result(line);
        log[r.request_id] = r;
    }
    return ReplayEvaluator(std::move(log));
}

Evaluation ReplayEvaluator::evaluate_request(const EvaluationRequest& request) {
    auto it = log_.find(request.request_id);
    if (it == log_.end())
        throw ContractViolation("no recorded response for request " + std::to_string(request.request_id));
    return it->second;
}

}  // namespace chimera
