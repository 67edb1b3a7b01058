#pragma once

#include <optional>
#include <span>
#include <vector>

#include "alrl/classifier/ic_model.hpp"
#include "alrl/data/pool.hpp"

namespace alrl::sampling {

using data::Id;
using data::Rng;

struct UncertaintyScores {
    double least_confident = 0.0;  // 1 - max p
    double margin = 0.0;           // p(1) - p(2), the two largest
    double entropy = 0.0;          // -sum p ln p, 0 ln 0 := 0
};

enum class Strategy { least_confident, margin, entropy };

/// Throws ConfigError unless p has >= 2 non-negative entries summing to 1 +- 1e-6.
UncertaintyScores score(std::span<const double> p);

/// Larger means more informative: lc, 1 - margin, entropy.
double informativeness(const UncertaintyScores& s, Strategy strategy);

/// Row index of the most informative distribution in `probs` [N, C]; ties go to the lowest index.
std::size_t select_most_informative(const nn::Tensor& probs, Strategy strategy);

/// BvsSB over the whole unlabeled pool: the id with the smallest margin,
/// ties broken by the lowest id. Throws PoolExhaustedError on an empty pool.
Id select_variant1(const data::DataPool& pool, const classifier::ICModel& model);

/// Uniform over U.
Id select_random(const data::DataPool& pool, Rng& rng);

/// Decaying-threshold stream selector over a small candidate sample.
struct ThresholdPolicy {
    double initial = 0.8;
    double decay = 0.05;
    std::size_t sample_size = 5;
    double threshold = 0.8;
    int skips = 0;  // consecutive skips since the last add

    void reset() noexcept {
        threshold = initial;
        skips = 0;
    }
};

struct Variant2Decision {
    bool add = false;
    std::size_t index = 0;  // into the candidate list, valid when add
    std::optional<Id> id;
};

/// Best candidate's informativeness (1 - margin) against the threshold: at or
/// above it the candidate is added and the threshold resets; otherwise the
/// sample is skipped and the threshold decays (floored at 0).
Variant2Decision select_variant2(ThresholdPolicy& policy, std::span<const double> margins);
Variant2Decision select_variant2(ThresholdPolicy& policy, std::span<const Id> candidates,
                                 const classifier::ICModel& model, const data::Dataset& ds);

}  // namespace alrl::sampling
