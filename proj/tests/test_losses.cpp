#include "doctest.h"

#include <cmath>
#include <vector>

#include "ifd/losses.hpp"
#include "ifd/network.hpp"
#include "test_util.hpp"

using namespace ifd;
using namespace ifd::test;

TEST_SUITE_BEGIN("losses");

namespace {

// Brute-force pairwise-summation reference: materializes every positive and
// negative pair term with plain loops, no log-sum-exp tricks.
double oracle_ccl(const Tensor& f, const std::vector<int>& ids, const std::vector<int>& cls,
                  double tau, double T) {
    const int n = f.dim(0), c = f.dim(1);
    auto dot = [&](int a, int b) {
        double acc = 0.0;
        for (int d = 0; d < c; ++d) acc += static_cast<double>(f(a, d)) * f(b, d);
        return acc;
    };
    int evaluated = 0;
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<int> pos, neg;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            (ids[j] == ids[i] ? pos : neg).push_back(j);
        }
        if (pos.empty()) continue;
        ++evaluated;
        double inner = 0.0;
        for (int p : pos) {
            const double w = cls[p] != cls[i] ? 1.0 / T : 1.0;
            const double num = std::exp(dot(i, p) / tau);
            double den = num;
            for (int j : neg) den += std::exp(dot(i, j) / tau);
            inner += w * std::log(num / den);
        }
        loss += inner / static_cast<double>(pos.size());
    }
    return evaluated ? -loss / evaluated : 0.0;
}

Tensor unit_rows(int n, int c, Rng& rng) {
    Tensor f({n, c});
    fill_random(f, rng);
    l2_normalize_rows(f);
    return f;
}

} // namespace


TEST_CASE("id_loss saturates to zero with a confident margin") {
    const int n = 3, k = 5;
    Tensor logits({n, k});
    std::vector<int> ids = {0, 2, 4};
    for (int i = 0; i < n; ++i) logits(i, ids[static_cast<std::size_t>(i)]) = 20.0f;
    CHECK(id_loss(logits, ids) < 1e-8);
}

TEST_CASE("uniform zero logits give ln K") {
    for (int k : {2, 5, 17}) {
        Tensor logits({3, k});
        const double loss = id_loss(logits, {0, 1, 0});
        CHECK(loss == doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-9));
    }
}

TEST_CASE("id_loss matches a direct log-softmax oracle") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(5));
        const int k = 2 + static_cast<int>(rng.below(7));
        Tensor logits({n, k});
        fill_random(logits, rng, 3.0f);
        std::vector<int> ids;
        for (int i = 0; i < n; ++i) ids.push_back(static_cast<int>(rng.below(k)));

        double expect = 0.0;
        for (int i = 0; i < n; ++i) {
            double denom = 0.0;
            for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(logits(i, j)));
            expect += -std::log(std::exp(static_cast<double>(logits(i, ids[i]))) / denom);
        }
        expect /= n;
        CHECK(id_loss(logits, ids) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("id_loss gradient matches central differences") {
    Rng rng(67);
    Tensor logits({4, 6});
    fill_random(logits, rng);
    const std::vector<int> ids = {1, 0, 5, 3};
    Tensor grad;
    id_loss(logits, ids, &grad);
    auto loss = [&] { return id_loss(logits, ids); };
    CHECK(gradcheck_max_rel_error(loss, logits.data(), grad.data(), logits.numel()) < 1e-4);
}

TEST_CASE("out-of-range identity labels are rejected") {
    Tensor logits({2, 3});
    CHECK_THROWS_AS(id_loss(logits, {0, 3}), std::invalid_argument);
    CHECK_THROWS_AS(id_loss(logits, {-1, 0}), std::invalid_argument);
}

TEST_CASE("ccl: identical same-appearance pair with no negatives is zero") {
    Tensor f({2, 4});
    f(0, 0) = 1.0f;
    f(1, 0) = 1.0f;
    BatchLabels labels{{7, 7}, {3, 3}};
    LossConfig cfg;
    CHECK(clothing_contrastive_loss(f, labels, cfg) == 0.0);
}

TEST_CASE("ccl at T=1 is bit-identical to the unweighted computation") {
    Rng rng(71);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(4));
        Tensor f = unit_rows(n, 8, rng);
        BatchLabels mixed, flat;
        for (int i = 0; i < n; ++i) {
            mixed.identities.push_back(static_cast<int>(rng.below(3)));
            mixed.clothings.push_back(static_cast<int>(rng.below(4)));
            flat.clothings.push_back(0);  // every pair takes the w=1 branch
        }
        flat.identities = mixed.identities;
        LossConfig t1;
        t1.T = 1.0f;
        LossConfig any;
        any.T = 0.37f;
        const double a = clothing_contrastive_loss(f, mixed, t1);
        const double b = clothing_contrastive_loss(f, flat, any);
        CHECK(a == b);
    }
}

TEST_CASE("ccl N=4 worked example matches the brute-force oracle") {
    Rng rng(73);
    Tensor f = unit_rows(4, 8, rng);
    BatchLabels labels{{0, 0, 1, 1}, {0, 1, 2, 3}};
    LossConfig cfg;
    cfg.tau = 0.1f;
    cfg.T = 0.5f;
    const double got = clothing_contrastive_loss(f, labels, cfg);
    const double want = oracle_ccl(f, labels.identities, labels.clothings, cfg.tau, cfg.T);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
    CHECK(std::fabs(got - want) < 1e-6);
}

TEST_CASE("ccl rejects empty batches and non-finite features") {
    LossConfig cfg;
    Tensor empty({0, 4});
    CHECK_THROWS_AS(clothing_contrastive_loss(empty, BatchLabels{{}, {}}, cfg),
                    std::invalid_argument);
    Tensor f({2, 2});
    f(0, 0) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(clothing_contrastive_loss(f, BatchLabels{{0, 0}, {0, 0}}, cfg),
                    std::invalid_argument);
}

TEST_CASE("anchors without positives are skipped and the mean renormalizes") {
    Rng rng(79);
    Tensor f = unit_rows(3, 6, rng);
    // identity 9 appears once: anchor 0 skipped, anchors 1,2 evaluated
    BatchLabels labels{{9, 1, 1}, {0, 1, 2}};
    LossConfig cfg;
    int evaluated = 0;
    const double got = clothing_contrastive_loss(f, labels, cfg, nullptr, &evaluated);
    CHECK(evaluated == 2);
    const double want = oracle_ccl(f, labels.identities, labels.clothings, cfg.tau, cfg.T);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));

    // all-singleton batch: nothing to evaluate, loss 0
    BatchLabels singletons{{0, 1, 2}, {0, 0, 0}};
    CHECK(clothing_contrastive_loss(f, singletons, cfg, nullptr, &evaluated) == 0.0);
    CHECK(evaluated == 0);
}

TEST_CASE("ccl oracle equivalence over random batches and the config grid") {
    Rng rng(83);
    const float taus[] = {0.05f, 0.1f, 1.0f};
    const float Ts[] = {0.25f, 0.5f, 1.0f, 2.0f};
    int cases = 0;
    for (int trial = 0; trial < 12; ++trial)
        for (float tau : taus)
            for (float T : Ts) {
                const int n = 2 + static_cast<int>(rng.below(7));   // N <= 8
                const int c = 2 + static_cast<int>(rng.below(15));  // C <= 16
                Tensor f = unit_rows(n, c, rng);
                BatchLabels labels;
                for (int i = 0; i < n; ++i) {
                    labels.identities.push_back(static_cast<int>(rng.below(4)));
                    labels.clothings.push_back(static_cast<int>(rng.below(3)));
                }
                LossConfig cfg;
                cfg.tau = tau;
                cfg.T = T;
                const double got = clothing_contrastive_loss(f, labels, cfg);
                const double want =
                    oracle_ccl(f, labels.identities, labels.clothings, tau, T);
                CHECK(std::fabs(got - want) < 1e-6);
                ++cases;
            }
    CHECK(cases >= 100);
}

TEST_CASE("ccl gradient matches central differences") {
    Rng rng(89);
    for (int trial = 0; trial < 5; ++trial) {
        const int n = 3 + static_cast<int>(rng.below(6));
        const int c = 2 + static_cast<int>(rng.below(15));
        Tensor f = unit_rows(n, c, rng);
        BatchLabels labels;
        for (int i = 0; i < n; ++i) {
            labels.identities.push_back(static_cast<int>(rng.below(3)));
            labels.clothings.push_back(static_cast<int>(rng.below(3)));
        }
        LossConfig cfg;
        cfg.tau = 0.1f;
        cfg.T = 0.5f;
        Tensor grad;
        clothing_contrastive_loss(f, labels, cfg, &grad);
        auto loss = [&] { return clothing_contrastive_loss(f, labels, cfg); };
        CHECK(gradcheck_max_rel_error(loss, f.data(), grad.data(), f.numel()) < 1e-4);
    }
}

TEST_CASE("ccl is invariant to anchor order") {
    Rng rng(97);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(5));
        Tensor f = unit_rows(n, 8, rng);
        BatchLabels labels;
        for (int i = 0; i < n; ++i) {
            labels.identities.push_back(static_cast<int>(rng.below(3)));
            labels.clothings.push_back(static_cast<int>(rng.below(3)));
        }
        LossConfig cfg;
        const double base = clothing_contrastive_loss(f, labels, cfg);

        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm);
        Tensor pf({n, f.dim(1)});
        BatchLabels plabels;
        for (int i = 0; i < n; ++i) {
            for (int d = 0; d < f.dim(1); ++d) pf(i, d) = f(perm[i], d);
            plabels.identities.push_back(labels.identities[perm[i]]);
            plabels.clothings.push_back(labels.clothings[perm[i]]);
        }
        CHECK(std::fabs(base - clothing_contrastive_loss(pf, plabels, cfg)) < 1e-9);
    }
}

TEST_CASE("smaller T strictly amplifies cross-clothing pair terms only") {
    Rng rng(101);
    Tensor f = unit_rows(6, 8, rng);
    const std::vector<int> ids = {0, 0, 0, 1, 1, 2};
    const std::vector<int> cls = {0, 0, 1, 2, 3, 4};

    // per-pair |w * log-term| at two values of T
    auto pair_contribution = [&](int i, int p, double T) {
        const int n = 6, c = 8;
        auto dot = [&](int a, int b) {
            double acc = 0.0;
            for (int d = 0; d < c; ++d) acc += static_cast<double>(f(a, d)) * f(b, d);
            return acc;
        };
        double den = std::exp(dot(i, p) / 0.1);
        for (int j = 0; j < n; ++j)
            if (ids[j] != ids[i]) den += std::exp(dot(i, j) / 0.1);
        const double w = cls[p] != cls[i] ? 1.0 / T : 1.0;
        return std::fabs(w * std::log(std::exp(dot(i, p) / 0.1) / den));
    };

    for (int i = 0; i < 6; ++i)
        for (int p = 0; p < 6; ++p) {
            if (p == i || ids[p] != ids[i]) continue;
            const double hi = pair_contribution(i, p, 0.5);
            const double lo = pair_contribution(i, p, 0.25);
            if (cls[p] != cls[i])
                CHECK(lo > hi);  // strictly amplified
            else
                CHECK(lo == hi);  // untouched
        }
}

TEST_CASE("weight table is exhaustive for N <= 4") {
    LossConfig half;
    half.T = 0.5f;
    LossConfig one;
    one.T = 1.0f;
    for (int ca = 0; ca < 4; ++ca)
        for (int cp = 0; cp < 4; ++cp) {
            const double w = ccl_pair_weight(ca, cp, half);
            if (ca == cp)
                CHECK(w == 1.0);
            else
                CHECK(w == 2.0);
            CHECK(ccl_pair_weight(ca, cp, one) == 1.0);
        }
}

TEST_CASE("an isolated identity enters only through the negative sums") {
    Rng rng(103);
    Tensor base = unit_rows(4, 8, rng);
    BatchLabels labels{{0, 0, 1, 1}, {0, 1, 2, 3}};
    LossConfig cfg;
    int evaluated_before = 0;
    clothing_contrastive_loss(base, labels, cfg, nullptr, &evaluated_before);

    Tensor extended({5, 8});
    std::copy(base.v.begin(), base.v.end(), extended.v.begin());
    Rng rng2(104);
    for (int d = 0; d < 8; ++d) extended(4, d) = rng2.normal();
    Tensor tail({1, 8});
    for (int d = 0; d < 8; ++d) tail(0, d) = extended(4, d);
    l2_normalize_rows(tail);
    for (int d = 0; d < 8; ++d) extended(4, d) = tail(0, d);
    BatchLabels xlabels{{0, 0, 1, 1, 99}, {0, 1, 2, 3, 5}};

    int evaluated_after = 0;
    const double got = clothing_contrastive_loss(extended, xlabels, cfg, nullptr, &evaluated_after);
    CHECK(evaluated_after == evaluated_before);  // the isolated anchor is skipped
    const double want = oracle_ccl(extended, xlabels.identities, xlabels.clothings, cfg.tau, cfg.T);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("total_loss is the exact weighted sum") {
    LossConfig cfg;
    CHECK(total_loss(0.0, 0.0, 0.0, cfg) == 0.0);
    cfg.lambda = 1.0f;
    CHECK(total_loss(1.0, 2.0, 3.0, cfg) == 6.0);
    cfg.lambda = 0.5f;
    CHECK(total_loss(1.0, 2.0, 3.0, cfg) == 4.5);
}

TEST_CASE("loss config validation") {
    LossConfig cfg;
    cfg.tau = 0.0f;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = LossConfig{};
    cfg.T = -1.0f;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = LossConfig{};
    cfg.lambda = -0.1f;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_SUITE_END();
