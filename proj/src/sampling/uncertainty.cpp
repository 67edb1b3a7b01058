#include "alrl/sampling/uncertainty.hpp"

#include <algorithm>
#include <cmath>

#include "alrl/errors.hpp"

namespace alrl::sampling {

UncertaintyScores score(std::span<const double> p) {
    if (p.size() < 2) throw ConfigError("uncertainty scores need at least 2 classes");
    double sum = 0.0;
    double best = -1.0, second = -1.0;
    double entropy = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw ConfigError("probabilities must be non-negative");
        sum += v;
        if (v > best) {
            second = best;
            best = v;
        } else if (v > second) {
            second = v;
        }
        if (v > 0.0) entropy -= v * std::log(v);
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("probabilities must sum to 1");
    return {1.0 - best, best - second, entropy};
}

double informativeness(const UncertaintyScores& s, Strategy strategy) {
    switch (strategy) {
        case Strategy::least_confident: return s.least_confident;
        case Strategy::margin: return 1.0 - s.margin;
        case Strategy::entropy: return s.entropy;
    }
    return 0.0;
}

std::size_t select_most_informative(const nn::Tensor& probs, Strategy strategy) {
    if (probs.rank() != 2 || probs.dim(0) == 0) throw ConfigError("expected a non-empty [N, C] probability matrix");
    std::size_t best = 0;
    double best_value = informativeness(score(probs.row(0)), strategy);
    for (std::size_t i = 1; i < probs.dim(0); ++i) {
        const double v = informativeness(score(probs.row(i)), strategy);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

Id select_variant1(const data::DataPool& pool, const classifier::ICModel& model) {
    if (pool.unlabeled().empty()) throw PoolExhaustedError("no unlabeled data left");
    std::vector<Id> ids = pool.unlabeled();
    std::sort(ids.begin(), ids.end());
    const auto probs = model.predict_proba(data::gather_images(pool.dataset(), ids));
    std::size_t best = 0;
    double best_margin = score(probs.row(0)).margin;
    for (std::size_t i = 1; i < ids.size(); ++i) {
        const double m = score(probs.row(i)).margin;
        if (m < best_margin) {
            best_margin = m;
            best = i;
        }
    }
    return ids[best];
}

Id select_random(const data::DataPool& pool, Rng& rng) {
    const auto& u = pool.unlabeled();
    if (u.empty()) throw PoolExhaustedError("no unlabeled data left");
    std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
    return u[pick(rng)];
}

Variant2Decision select_variant2(ThresholdPolicy& policy, std::span<const double> margins) {
    if (margins.empty()) throw ConfigError("variant-2 selection needs at least one candidate");
    std::size_t best = 0;
    for (std::size_t i = 1; i < margins.size(); ++i) {
        if (margins[i] < margins[best]) best = i;
    }
    Variant2Decision d;
    if (1.0 - margins[best] >= policy.threshold) {
        d.add = true;
        d.index = best;
        policy.reset();
    } else {
        // threshold = initial - decay * skips, floored at 0
        ++policy.skips;
        policy.threshold = std::max(0.0, policy.initial - policy.decay * policy.skips);
    }
    return d;
}

Variant2Decision select_variant2(ThresholdPolicy& policy, std::span<const Id> candidates,
                                 const classifier::ICModel& model, const data::Dataset& ds) {
    if (candidates.size() != policy.sample_size) {
        throw ConfigError("variant-2 expects exactly " + std::to_string(policy.sample_size) + " candidates");
    }
    const auto probs = model.predict_proba(data::gather_images(ds, candidates));
    std::vector<double> margins;
    margins.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) margins.push_back(score(probs.row(i)).margin);
    auto d = select_variant2(policy, margins);
    if (d.add) d.id = candidates[d.index];
    return d;
}

}  // namespace alrl::sampling
