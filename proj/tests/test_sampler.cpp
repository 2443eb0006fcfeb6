#include "doctest.h"

#include <algorithm>
#include <map>
#include <set>

#include "ifd/sampler.hpp"
#include "test_util.hpp"

using namespace ifd;
using namespace ifd::test;

TEST_SUITE_BEGIN("sampler");

namespace {

// Largest-remainder reference, written out step by step.
std::vector<int> oracle_allocate(const std::vector<int>& sizes, int budget) {
    const int n = static_cast<int>(sizes.size());
    long long total = 0;
    for (int s : sizes) total += s;
    std::vector<int> counts(n);
    std::vector<std::pair<double, int>> rem;  // (-remainder, index) for stable ordering
    int assigned = 0;
    for (int i = 0; i < n; ++i) {
        const double ideal = static_cast<double>(budget) * sizes[i] / total;
        counts[i] = static_cast<int>(std::floor(ideal));
        assigned += counts[i];
        rem.push_back({-(ideal - std::floor(ideal)), i});
    }
    std::sort(rem.begin(), rem.end());
    for (int i = 0; i < budget - assigned; ++i) ++counts[rem[static_cast<std::size_t>(i % n)].second];
    return counts;
}

// Metadata-only dataset: images never touched by the sampler.
DatasetIndex make_index(const std::vector<std::pair<int, int>>& id_clothing) {
    DatasetIndex index;
    for (auto [id, cl] : id_clothing) {
        Sample s;
        s.image = Tensor({3, 1, 1});
        s.parsing.height = 1;
        s.parsing.width = 1;
        s.parsing.pixels = {0};
        s.identity = id;
        s.clothing = cl;
        index.add(std::move(s));
    }
    return index;
}

DatasetIndex grid_index(int ids, int clothings, int images) {
    std::vector<std::pair<int, int>> rows;
    for (int id = 0; id < ids; ++id)
        for (int cl = 0; cl < clothings; ++cl)
            for (int im = 0; im < images; ++im) rows.push_back({id, cl});
    return make_index(rows);
}

} // namespace

TEST_CASE("allocate_proportional worked examples") {
    CHECK(allocate_proportional({6, 2}, 4) == std::vector<int>{3, 1});
    CHECK(allocate_proportional({5}, 3) == std::vector<int>{3});
    CHECK(allocate_proportional({1, 1, 1}, 3) == std::vector<int>{1, 1, 1});
}

TEST_CASE("allocate_proportional rejects bad input") {
    CHECK_THROWS_AS(allocate_proportional({}, 4), std::invalid_argument);
    CHECK_THROWS_AS(allocate_proportional({1, 2}, 0), std::invalid_argument);
    CHECK_THROWS_AS(allocate_proportional({1, 0}, 2), std::invalid_argument);
}

TEST_CASE("allocate_proportional matches the largest-remainder oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        std::vector<int> sizes;
        int total = 0;
        for (int i = 0; i < n; ++i) {
            sizes.push_back(1 + static_cast<int>(rng.below(12)));
            total += sizes.back();
        }
        const int budget = 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(total)));
        const auto got = allocate_proportional(sizes, budget);
        CHECK(got == oracle_allocate(sizes, budget));

        int sum = 0;
        for (std::size_t i = 0; i < got.size(); ++i) {
            sum += got[i];
            CHECK(got[i] <= sizes[i]);  // feasible whenever budget <= total
        }
        CHECK(sum == budget);
    }
}

TEST_CASE("proportional batches follow the allocation exactly") {
    // one identity with appearance sizes [6,2]: every batch carries 3+1
    std::vector<std::pair<int, int>> rows;
    for (int i = 0; i < 6; ++i) rows.push_back({0, 0});
    for (int i = 0; i < 2; ++i) rows.push_back({0, 1});
    for (int i = 0; i < 8; ++i) rows.push_back({1, 0});  // second identity for P=2
    DatasetIndex index = make_index(rows);

    SamplerConfig cfg;
    cfg.P = 2;
    cfg.B = 4;
    cfg.seed = 3;
    BatchSampler sampler(index, cfg);
    for (int trial = 0; trial < 20; ++trial) {
        const auto batch = sampler.next_batch();
        REQUIRE(batch.size() == 8);
        int app0 = 0, app1 = 0;
        for (int pos : batch) {
            if (index.samples[static_cast<std::size_t>(pos)].identity != 0) continue;
            (index.samples[static_cast<std::size_t>(pos)].clothing == 0 ? app0 : app1)++;
        }
        CHECK(app0 == 3);
        CHECK(app1 == 1);
    }
}

TEST_CASE("batches hold P distinct identities with B samples each") {
    DatasetIndex index = grid_index(5, 2, 4);
    SamplerConfig cfg;
    cfg.P = 3;
    cfg.B = 4;
    cfg.seed = 11;
    BatchSampler sampler(index, cfg);
    for (int trial = 0; trial < 50; ++trial) {
        const auto batch = sampler.next_batch();
        REQUIRE(batch.size() == static_cast<std::size_t>(cfg.P * cfg.B));
        std::map<int, int> per_id;
        for (int pos : batch) per_id[index.samples[static_cast<std::size_t>(pos)].identity]++;
        CHECK(per_id.size() == 3);
        for (const auto& [id, count] : per_id) CHECK(count == cfg.B);
    }
}

TEST_CASE("P=2 B=2 on a 2-identity set uses distinct slots") {
    DatasetIndex index = grid_index(2, 1, 4);
    SamplerConfig cfg;
    cfg.P = 2;
    cfg.B = 2;
    cfg.seed = 5;
    BatchSampler sampler(index, cfg);
    const auto batch = sampler.next_batch();
    REQUIRE(batch.size() == 4);
    std::set<int> distinct(batch.begin(), batch.end());
    CHECK(distinct.size() == 4);  // enough stock, so no repeats
}

TEST_CASE("draws are without replacement unless the bucket runs short") {
    // identity 0 owns appearances sized [1,1]; B=4 forces replacement
    DatasetIndex index = make_index({{0, 0}, {0, 1}, {1, 0}, {1, 1}, {1, 2}, {1, 3}});
    SamplerConfig cfg;
    cfg.P = 2;
    cfg.B = 4;
    cfg.seed = 1;
    BatchSampler sampler(index, cfg);
    const auto batch = sampler.next_batch();
    REQUIRE(batch.size() == 8);
    std::map<int, int> count0;
    for (int pos : batch)
        if (index.samples[static_cast<std::size_t>(pos)].identity == 0) count0[pos]++;
    int total0 = 0;
    for (auto& [pos, c] : count0) total0 += c;
    CHECK(total0 == 4);            // budget met via replacement
    CHECK(count0.size() == 2);     // both singleton buckets used
}

TEST_CASE("pk mode marginals are near-uniform over many batches") {
    DatasetIndex index = grid_index(4, 2, 6);  // 48 samples, 12 per identity
    SamplerConfig cfg;
    cfg.P = 2;
    cfg.B = 2;
    cfg.mode = SamplerConfig::Mode::PK;
    cfg.seed = 17;
    BatchSampler sampler(index, cfg);

    std::vector<int> hits(index.size(), 0);
    const int batches = 10000;
    for (int i = 0; i < batches; ++i)
        for (int pos : sampler.next_batch()) hits[static_cast<std::size_t>(pos)]++;

    // every identity appears in half the batches; within it each of the 12
    // samples is uniform: expect batches * B / 2 / 12 draws
    const double expect = batches * 2.0 / 2.0 / 12.0;
    const double sigma = std::sqrt(expect * (1.0 - 1.0 / 12.0));
    for (int h : hits) CHECK(std::fabs(h - expect) < 3.5 * sigma);
}

TEST_CASE("sampler needs at least P identities") {
    DatasetIndex index = grid_index(2, 1, 4);
    SamplerConfig cfg;
    cfg.P = 3;
    cfg.B = 2;
    BatchSampler sampler(index, cfg);
    CHECK_THROWS_WITH_AS(sampler.next_batch(), doctest::Contains("configuration error"),
                         std::runtime_error);
}

TEST_CASE("epoch plan length is the floor of total over P*B") {
    DatasetIndex index = grid_index(4, 3, 5);  // 60 samples
    SamplerConfig cfg;
    cfg.P = 4;
    cfg.B = 5;
    cfg.seed = 23;
    BatchSampler sampler(index, cfg);
    const auto plan = sampler.epoch_plan();
    CHECK(plan.size() == 3);
    for (const auto& b : plan) CHECK(b.size() == 20);
}

TEST_CASE("same seed reproduces the same plan") {
    DatasetIndex index = grid_index(6, 2, 4);
    SamplerConfig cfg;
    cfg.P = 3;
    cfg.B = 2;
    cfg.seed = 29;
    BatchSampler a(index, cfg), b(index, cfg);
    for (int e = 0; e < 3; ++e) {
        const auto pa = a.epoch_plan();
        const auto pb = b.epoch_plan();
        CHECK(pa == pb);
    }
    BatchSampler c(index, SamplerConfig{cfg.P, cfg.B, cfg.mode, 31});
    CHECK(a.epoch_plan() != c.epoch_plan());
}

TEST_CASE("every identity appears in each epoch when there is room") {
    DatasetIndex index = grid_index(12, 2, 4);  // 96 samples
    SamplerConfig cfg;
    cfg.P = 4;
    cfg.B = 2;
    cfg.seed = 37;
    BatchSampler sampler(index, cfg);
    for (int e = 0; e < 5; ++e) {
        const auto plan = sampler.epoch_plan();  // 12 batches x 4 ids >= 12
        std::set<int> seen;
        for (const auto& batch : plan)
            for (int pos : batch) seen.insert(index.samples[static_cast<std::size_t>(pos)].identity);
        CHECK(seen.size() == 12);
    }
}

TEST_CASE("config validation") {
    SamplerConfig cfg;
    cfg.P = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = SamplerConfig{};
    cfg.B = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(SamplerConfig::parse_mode("nope"), std::invalid_argument);
    CHECK(SamplerConfig::parse_mode("pk") == SamplerConfig::Mode::PK);
}

TEST_SUITE_END();
