#pragma once

#include <cstdint>
#include <vector>

#include "ifd/datamodel.hpp"
#include "ifd/rng.hpp"

namespace ifd {

struct SamplerConfig {
    enum class Mode { PK, ProportionalRAS };
    int P = 4;  // identities per batch
    int B = 4;  // samples per identity (the per-identity budget)
    Mode mode = Mode::ProportionalRAS;
    std::uint64_t seed = 1;

    void validate() const;
    static Mode parse_mode(const std::string& name);
    static const char* mode_name(Mode m);
};

// Largest-remainder (Hamilton) apportionment of `budget` across buckets
// proportional to their sizes. Counts sum exactly to the budget; remainder
// ties break by ascending bucket index.
std::vector<int> allocate_proportional(const std::vector<int>& sizes, int budget);

// Batch producer. Identities cycle round-robin over a per-epoch shuffled
// list, so each epoch covers every identity when there is room. Per
// identity, proportional-ras mode spreads the budget across that identity's
// appearance buckets via allocate_proportional (capped at bucket sizes, any
// deficit going to the bucket with the most spare capacity); pk mode draws
// uniformly. Draws are without replacement unless a bucket is smaller than
// its allocation.
class BatchSampler {
public:
    BatchSampler(const DatasetIndex& index, const SamplerConfig& config);

    std::vector<int> next_batch();
    std::vector<std::vector<int>> epoch_plan();  // floor(total / (P*B)) batches
    int batches_per_epoch() const;

    std::uint64_t rng_state() const { return rng_.state; }
    void set_rng_state(std::uint64_t s) {
        rng_.state = s;
        cycle_.clear();
    }

private:
    int pick_identity(std::vector<int>& in_batch);

    const DatasetIndex* index_;
    SamplerConfig config_;
    Rng rng_;
    std::vector<int> cycle_;  // identities not yet served this pass
};

} // namespace ifd
