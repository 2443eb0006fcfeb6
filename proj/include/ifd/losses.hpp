#pragma once

#include <vector>

#include "ifd/tensor.hpp"

namespace ifd {

struct LossConfig {
    float tau = 0.1f;     // contrastive temperature
    float T = 0.5f;       // incentive divisor: cross-clothing pairs weigh 1/T
    float lambda = 1.0f;  // weight of the clothing contrastive term

    void validate() const;
};

struct BatchLabels {
    std::vector<int> identities;
    std::vector<int> clothings;  // globally unique appearance ids

    int size() const { return static_cast<int>(identities.size()); }
    void validate() const;
};

// Mean cross-entropy over identity logits. If dlogits is non-null it
// receives the gradient of the mean loss.
double id_loss(const Tensor& logits, const std::vector<int>& identities,
               Tensor* dlogits = nullptr);

// Pair weight: 1/T for same-identity pairs with different clothing labels,
// 1 otherwise.
double ccl_pair_weight(int clothing_anchor, int clothing_positive, const LossConfig& config);

// Supervised contrastive loss over clothing features with clothing-aware
// pair weights. For each anchor the positive set is the other same-identity
// samples; the per-pair denominator is that positive term plus every
// different-identity term. Anchors whose identity appears only once in the
// batch are skipped and the outer mean runs over the remaining anchors.
// Features are expected row-normalized upstream. dfeatures, when non-null,
// receives the analytic gradient.
double clothing_contrastive_loss(const Tensor& features, const BatchLabels& labels,
                                 const LossConfig& config, Tensor* dfeatures = nullptr,
                                 int* evaluated_anchors = nullptr);

// L_all = L_ID^m + L_ID^a + lambda * L_CCL
double total_loss(double id_main, double id_attn, double ccl, const LossConfig& config);

} // namespace ifd
