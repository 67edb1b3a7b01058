#include "alrl/data/pool.hpp"

#include <algorithm>
#include <unordered_set>

#include "alrl/errors.hpp"

namespace alrl::data {

DataPool::DataPool(std::shared_ptr<const Dataset> dataset) : dataset_(std::move(dataset)) {
    if (!dataset_) throw ConfigError("data pool needs a dataset");
    const std::size_t n = dataset_->size();
    unlabeled_.resize(n);
    u_pos_.resize(n);
    in_l_.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        unlabeled_[i] = i;
        u_pos_[i] = static_cast<std::ptrdiff_t>(i);
    }
}

bool DataPool::is_labeled(Id id) const { return id < in_l_.size() && in_l_[id]; }

bool DataPool::is_unlabeled(Id id) const { return id < u_pos_.size() && u_pos_[id] >= 0; }

void DataPool::label(Id id) {
    if (!is_unlabeled(id)) {
        throw LogicError("datapoint " + std::to_string(id) + " is not in the unlabeled set");
    }
    const auto pos = static_cast<std::size_t>(u_pos_[id]);
    const Id last = unlabeled_.back();
    unlabeled_[pos] = last;
    u_pos_[last] = static_cast<std::ptrdiff_t>(pos);
    unlabeled_.pop_back();
    u_pos_[id] = -1;
    labeled_.push_back(id);
    in_l_[id] = true;
}

void DataPool::clear_labels() {
    for (Id id : labeled_) {
        in_l_[id] = false;
        u_pos_[id] = static_cast<std::ptrdiff_t>(unlabeled_.size());
        unlabeled_.push_back(id);
    }
    labeled_.clear();
}

void build_seed_set(DataPool& pool, int per_class, Rng& rng) {
    if (per_class < 0) throw ConfigError("seed set size per class must be non-negative");
    if (per_class == 0) return;
    const auto& ds = pool.dataset();
    std::vector<std::vector<Id>> by_class(static_cast<std::size_t>(ds.num_classes));
    // sorted so the choice depends only on the rng, not on U's internal order
    std::vector<Id> u = pool.unlabeled();
    std::sort(u.begin(), u.end());
    for (Id id : u) by_class[static_cast<std::size_t>(ds.labels[id])].push_back(id);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < static_cast<std::size_t>(per_class)) {
            throw ConfigError("class " + std::to_string(c) + " has only " + std::to_string(by_class[c].size()) +
                              " unlabeled samples, seed set needs " + std::to_string(per_class));
        }
    }
    for (auto& ids : by_class) {
        for (int i = 0; i < per_class; ++i) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), ids.size() - 1);
            std::swap(ids[static_cast<std::size_t>(i)], ids[pick(rng)]);
            pool.label(ids[static_cast<std::size_t>(i)]);
        }
    }
}

std::vector<Id> draw_candidates(const DataPool& pool, std::size_t k, Rng& rng, std::span<const Id> exclude) {
    const auto& u = pool.unlabeled();
    std::size_t excluded_in_u = 0;
    std::unordered_set<Id> excl;
    for (Id id : exclude) {
        if (pool.is_unlabeled(id) && excl.insert(id).second) ++excluded_in_u;
    }
    const std::size_t available = u.size() - excluded_in_u;
    if (available < k) {
        throw PoolExhaustedError("requested " + std::to_string(k) + " candidates but only " +
                                 std::to_string(available) + " unlabeled ids are available");
    }
    std::vector<Id> out;
    out.reserve(k);
    if (k * 2 > available) {
        std::vector<Id> avail;
        avail.reserve(available);
        for (Id id : u) {
            if (!excl.count(id)) avail.push_back(id);
        }
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, avail.size() - 1);
            std::swap(avail[i], avail[pick(rng)]);
            out.push_back(avail[i]);
        }
        return out;
    }
    std::uniform_int_distribution<std::size_t> pick(0, u.size() - 1);
    while (out.size() < k) {
        const Id id = u[pick(rng)];
        if (excl.insert(id).second) out.push_back(id);
    }
    return out;
}

}  // namespace alrl::data
