#include "ifd/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace ifd {

void SamplerConfig::validate() const {
    if (P < 2) throw std::invalid_argument("sampler: P must be >= 2");
    if (B < 2) throw std::invalid_argument("sampler: B must be >= 2");
}

SamplerConfig::Mode SamplerConfig::parse_mode(const std::string& name) {
    if (name == "pk") return Mode::PK;
    if (name == "proportional-ras") return Mode::ProportionalRAS;
    throw std::invalid_argument("sampler: unknown mode '" + name +
                                "' (expected pk|proportional-ras)");
}

const char* SamplerConfig::mode_name(Mode m) {
    return m == Mode::PK ? "pk" : "proportional-ras";
}

std::vector<int> allocate_proportional(const std::vector<int>& sizes, int budget) {
    if (sizes.empty())
        throw std::invalid_argument("allocate_proportional: appearance size list is empty");
    if (budget < 1) throw std::invalid_argument("allocate_proportional: budget must be >= 1");
    long long total = 0;
    for (int s : sizes) {
        if (s <= 0) throw std::invalid_argument("allocate_proportional: sizes must be positive");
        total += s;
    }

    const int n = static_cast<int>(sizes.size());
    std::vector<int> counts(n, 0);
    std::vector<double> remainders(n, 0.0);
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double ideal = static_cast<double>(budget) * sizes[i] / static_cast<double>(total);
        counts[i] = static_cast<int>(ideal);
        remainders[i] = ideal - counts[i];
        assigned += counts[i];
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainders[a] > remainders[b]; });
    for (int i = 0; i < budget - assigned; ++i) ++counts[order[i % n]];
    return counts;
}

namespace {

// Cap allocations at bucket sizes, pushing any deficit to the bucket with
// the most spare capacity. When the budget exceeds the identity's total
// samples the surplus lands on the largest bucket and is drawn with
// replacement later.
std::vector<int> cap_and_reassign(std::vector<int> counts, const std::vector<int>& sizes) {
    int deficit = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > sizes[i]) {
            deficit += counts[i] - sizes[i];
            counts[i] = sizes[i];
        }
    while (deficit > 0) {
        int best = -1, best_spare = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            const int spare = sizes[i] - counts[i];
            if (spare > best_spare) {
                best_spare = spare;
                best = static_cast<int>(i);
            }
        }
        if (best < 0) {
            // no capacity left anywhere; overfill the largest bucket
            best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
            counts[best] += deficit;
            break;
        }
        const int take = std::min(deficit, best_spare);
        counts[best] += take;
        deficit -= take;
    }
    return counts;
}

} // namespace

BatchSampler::BatchSampler(const DatasetIndex& index, const SamplerConfig& config)
    : index_(&index), config_(config), rng_(config.seed) {
    config_.validate();
}

int BatchSampler::pick_identity(std::vector<int>& in_batch) {
    std::vector<int> stash;
    int chosen = -1;
    while (true) {
        if (cycle_.empty()) {
            cycle_ = index_->identities();
            rng_.shuffle(cycle_);
        }
        const int id = cycle_.back();
        cycle_.pop_back();
        if (std::find(in_batch.begin(), in_batch.end(), id) == in_batch.end()) {
            chosen = id;
            break;
        }
        stash.push_back(id);
    }
    // return skipped identities to the head of the cycle, order preserved
    for (auto it = stash.rbegin(); it != stash.rend(); ++it) cycle_.push_back(*it);
    return chosen;
}

std::vector<int> BatchSampler::next_batch() {
    if (static_cast<int>(index_->by_identity.size()) < config_.P)
        throw std::runtime_error("configuration error: sampler needs at least " +
                                 std::to_string(config_.P) + " identities, dataset has " +
                                 std::to_string(index_->by_identity.size()));

    std::vector<int> batch;
    std::vector<int> batch_ids;
    batch.reserve(static_cast<std::size_t>(config_.P) * config_.B);
    for (int p = 0; p < config_.P; ++p) {
        const int id = pick_identity(batch_ids);
        batch_ids.push_back(id);

        if (config_.mode == SamplerConfig::Mode::PK) {
            std::vector<int> pool = index_->by_identity.at(id);
            rng_.shuffle(pool);
            for (int b = 0; b < config_.B; ++b) {
                if (b < static_cast<int>(pool.size()))
                    batch.push_back(pool[b]);
                else
                    batch.push_back(pool[rng_.below(static_cast<std::uint32_t>(pool.size()))]);
            }
            continue;
        }

        // proportional-ras: appearance buckets in ascending appearance order
        std::vector<const std::vector<int>*> buckets;
        std::vector<int> sizes;
        const std::uint64_t lo = appearance_id(id, 0);
        const std::uint64_t hi = appearance_id(id + 1, 0);
        for (auto it = index_->by_appearance.lower_bound(lo);
             it != index_->by_appearance.end() && it->first < hi; ++it) {
            buckets.push_back(&it->second);
            sizes.push_back(static_cast<int>(it->second.size()));
        }
        const std::vector<int> counts =
            cap_and_reassign(allocate_proportional(sizes, config_.B), sizes);
        for (std::size_t a = 0; a < buckets.size(); ++a) {
            if (counts[a] == 0) continue;
            std::vector<int> pool = *buckets[a];
            rng_.shuffle(pool);
            for (int b = 0; b < counts[a]; ++b) {
                if (b < static_cast<int>(pool.size()))
                    batch.push_back(pool[b]);
                else
                    batch.push_back(pool[rng_.below(static_cast<std::uint32_t>(pool.size()))]);
            }
        }
    }
    return batch;
}

int BatchSampler::batches_per_epoch() const {
    return static_cast<int>(index_->size()) / (config_.P * config_.B);
}

std::vector<std::vector<int>> BatchSampler::epoch_plan() {
    std::vector<std::vector<int>> plan;
    const int n = batches_per_epoch();
    plan.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) plan.push_back(next_batch());
    return plan;
}

} // namespace ifd
