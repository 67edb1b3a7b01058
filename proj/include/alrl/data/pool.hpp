#pragma once

#include <memory>
#include <span>
#include <vector>

#include "alrl/data/dataset.hpp"

namespace alrl::data {

/// Labeled set L and unlabeled set U over a shared, immutable dataset.
/// Ids are dataset indices. L keeps insertion order; U supports O(1)
/// membership, removal and uniform sampling.
class DataPool {
public:
    DataPool() = default;
    /// U = all dataset ids, L empty.
    explicit DataPool(std::shared_ptr<const Dataset> dataset);

    const Dataset& dataset() const { return *dataset_; }
    std::shared_ptr<const Dataset> dataset_ptr() const { return dataset_; }

    const std::vector<Id>& labeled() const noexcept { return labeled_; }
    /// Unordered view of U (order changes as ids are removed).
    const std::vector<Id>& unlabeled() const noexcept { return unlabeled_; }

    bool is_labeled(Id id) const;
    bool is_unlabeled(Id id) const;
    std::size_t total() const noexcept { return labeled_.size() + unlabeled_.size(); }

    /// Moves `id` from U to L. Throws LogicError if id is not in U.
    void label(Id id);

    /// Moves every labeled id back to U; L becomes empty.
    void clear_labels();

private:
    std::shared_ptr<const Dataset> dataset_;
    std::vector<Id> labeled_;
    std::vector<Id> unlabeled_;
    std::vector<std::ptrdiff_t> u_pos_;  // index into unlabeled_, or -1
    std::vector<bool> in_l_;
};

/// Moves `per_class` uniformly chosen ids of every class from U to L.
/// Throws ConfigError when some class has fewer than `per_class` unlabeled ids.
void build_seed_set(DataPool& pool, int per_class, Rng& rng);

/// k distinct ids drawn uniformly without replacement from U \ exclude.
/// Ids stay in U. Throws PoolExhaustedError when fewer than k are available.
std::vector<Id> draw_candidates(const DataPool& pool, std::size_t k, Rng& rng, std::span<const Id> exclude = {});

}  // namespace alrl::data
