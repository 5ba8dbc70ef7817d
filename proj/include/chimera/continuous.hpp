#pragma once

#include <bit>
#include <cmath>
#include <cstdint>

#include <Eigen/Core>
#include <json.hpp>

#include "chimera/colony.hpp"
#include "chimera/errors.hpp"

namespace chimera {

/// Continuous box-constrained search space for the colony. A trial perturbs one
/// coordinate with Gaussian noise whose scale is drawn log-uniformly between
/// `min_scale` and 1, relative to the box width.
template <typename Scalar = double>
class BoxSpace {
public:
    using genome_type = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    BoxSpace(Eigen::Index dim, Scalar lower, Scalar upper, Scalar min_scale = Scalar(1e-6))
        : dim_(dim), lower_(lower), upper_(upper), min_scale_(min_scale) {
        if (dim < 1 || !(lower < upper) || !(min_scale > 0) || min_scale > 1)
            throw ConfigError("box", "need dim >= 1, lower < upper and 0 < min_scale <= 1");
    }

    Eigen::Index dim() const { return dim_; }

    genome_type random(RandomSource& rng) const {
        genome_type x(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i) x[i] = static_cast<Scalar>(rng.uniform(lower_, upper_));
        return x;
    }

    genome_type mutate(const genome_type& parent, std::uint64_t /*exhaustion*/, RandomSource& rng) const {
        genome_type child = parent;
        const auto j = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dim_)));
        const double scale = std::pow(10.0, rng.uniform(std::log10(double(min_scale_)), 0.0));
        child[j] += static_cast<Scalar>(rng.normal(0.0, scale * double(upper_ - lower_)));
        child = child.cwiseMax(lower_).cwiseMin(upper_);
        return child;
    }

    std::uint64_t fingerprint(const genome_type& x) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const auto bits = std::bit_cast<std::uint64_t>(static_cast<double>(x[i]));
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xffu;
                h *= 0x100000001b3ULL;
            }
        }
        return h;
    }

    nlohmann::json to_json(const genome_type& x) const {
        nlohmann::json out = nlohmann::json::array();
        for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(static_cast<double>(x[i]));
        return out;
    }

    genome_type from_json(const nlohmann::json& record) const {
        if (!record.is_array() || static_cast<Eigen::Index>(record.size()) != dim_)
            throw SchemaError("vector genome must be an array of " + std::to_string(dim_) + " numbers");
        genome_type x(dim_);
        for (Eigen::Index i = 0; i < dim_; ++i) x[i] = static_cast<Scalar>(record.at(static_cast<std::size_t>(i)).get<double>());
        return x;
    }

private:
    Eigen::Index dim_;
    Scalar lower_;
    Scalar upper_;
    Scalar min_scale_;
};

/// f(x) = |x|^2.
template <typename Scalar = double>
class SphereObjective final : public Evaluator<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> {
public:
    Evaluation evaluate(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x, std::uint64_t request_id) override {
        Evaluation r;
        r.request_id = request_id;
        r.val_loss = static_cast<double>(x.squaredNorm());
        r.train_loss = r.val_loss;
        return r;
    }
};

}  // namespace chimera
