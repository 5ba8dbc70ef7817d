#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "chimera/errors.hpp"

namespace chimera {

/// Seeded 64-bit Mersenne Twister with a text-serializable state.
///
/// Distributions are constructed per draw so the engine state is the only
/// state; saving it is enough to resume a stream bit-exactly.
class RandomSource {
public:
    using engine_type = std::mt19937_64;
    using result_type = engine_type::result_type;

    explicit RandomSource(std::uint64_t seed = 5489u) : engine_(seed) {}

    static constexpr result_type min() { return engine_type::min(); }
    static constexpr result_type max() { return engine_type::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform integer on the closed interval [lo, hi].
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

    /// Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }

    double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Seed for an independent child stream.
    std::uint64_t split() {
        // splitmix64 finalizer decorrelates the child seed from the parent output
        std::uint64_t z = engine_() + 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::string save() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    static RandomSource restore(const std::string& text) {
        RandomSource rng;
        std::istringstream is(text);
        is >> rng.engine_;
        if (is.fail()) throw CorruptSnapshot("unreadable random state");
        return rng;
    }

    bool operator==(const RandomSource& other) const { return engine_ == other.engine_; }

private:
    engine_type engine_;
};

}  // namespace chimera
