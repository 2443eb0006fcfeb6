#include "ifd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ifd {

void LossConfig::validate() const {
    if (!(tau > 0.0f)) throw std::invalid_argument("loss: tau must be positive");
    if (!(T > 0.0f)) throw std::invalid_argument("loss: T must be positive");
    if (lambda < 0.0f) throw std::invalid_argument("loss: lambda must be non-negative");
}

void BatchLabels::validate() const {
    if (identities.empty())
        throw std::invalid_argument("loss: batch labels must be non-empty");
    if (identities.size() != clothings.size())
        throw std::invalid_argument("loss: identity and clothing label counts differ");
}

double id_loss(const Tensor& logits, const std::vector<int>& identities, Tensor* dlogits) {
    if (logits.rank() != 2) throw std::invalid_argument("id_loss: expected {N,K} logits");
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(identities.size()) != n)
        throw std::invalid_argument("id_loss: got " + std::to_string(identities.size()) +
                                    " labels for " + std::to_string(n) + " rows");
    for (int y : identities)
        if (y < 0 || y >= k)
            throw std::invalid_argument("id_loss: label " + std::to_string(y) +
                                        " out of range for " + std::to_string(k) + " classes");
    if (dlogits) *dlogits = Tensor({n, k});

    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        double mx = logits(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max<double>(mx, logits(i, j));
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(logits(i, j) - mx);
        const double logz = mx + std::log(denom);
        total += logz - logits(i, identities[i]);
        if (dlogits) {
            for (int j = 0; j < k; ++j)
                (*dlogits)(i, j) =
                    static_cast<float>(std::exp(logits(i, j) - logz) / n);
            (*dlogits)(i, identities[i]) -= 1.0f / static_cast<float>(n);
        }
    }
    return total / n;
}

double ccl_pair_weight(int clothing_anchor, int clothing_positive, const LossConfig& config) {
    return clothing_positive != clothing_anchor ? 1.0 / static_cast<double>(config.T) : 1.0;
}

double clothing_contrastive_loss(const Tensor& features, const BatchLabels& labels,
                                 const LossConfig& config, Tensor* dfeatures,
                                 int* evaluated_anchors) {
    config.validate();
    labels.validate();
    if (features.rank() != 2) throw std::invalid_argument("ccl: expected {N,C} features");
    const int n = features.dim(0), c = features.dim(1);
    if (labels.size() != n)
        throw std::invalid_argument("ccl: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(n) + " feature rows");
    for (float v : features.v)
        if (!std::isfinite(v)) throw std::invalid_argument("ccl: features must be finite");

    // Pairwise similarities s[i][j] = (f_i . f_j) / tau.
    std::vector<double> sims(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int d = 0; d < c; ++d)
                dot += static_cast<double>(features(i, d)) * features(j, d);
            sims[static_cast<std::size_t>(i) * n + j] = dot / config.tau;
        }

    // ds[i][j] = dL/ds(anchor i, other j), accumulated in ascending order.
    std::vector<double> dsims;
    if (dfeatures) dsims.assign(static_cast<std::size_t>(n) * n, 0.0);

    // First pass: count anchors with non-empty positive sets.
    int evaluated = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (j != i && labels.identities[j] == labels.identities[i]) {
                ++evaluated;
                break;
            }
    if (evaluated_anchors) *evaluated_anchors = evaluated;
    if (evaluated == 0) {
        if (dfeatures) *dfeatures = Tensor({n, c});
        return 0.0;
    }

    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<int> positives, negatives;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (labels.identities[j] == labels.identities[i])
                positives.push_back(j);
            else
                negatives.push_back(j);
        }
        if (positives.empty()) continue;

        const double inv_p = 1.0 / static_cast<double>(positives.size());
        for (int p : positives) {
            // log-sum-exp over {s_ip} + negatives with max subtraction
            double mx = sims[static_cast<std::size_t>(i) * n + p];
            for (int j : negatives)
                mx = std::max(mx, sims[static_cast<std::size_t>(i) * n + j]);
            double denom = std::exp(sims[static_cast<std::size_t>(i) * n + p] - mx);
            for (int j : negatives)
                denom += std::exp(sims[static_cast<std::size_t>(i) * n + j] - mx);
            const double log_denom = mx + std::log(denom);
            const double w = ccl_pair_weight(labels.clothings[i], labels.clothings[p], config);
            const double log_ratio = sims[static_cast<std::size_t>(i) * n + p] - log_denom;
            loss += -w * inv_p * log_ratio / evaluated;

            if (dfeatures) {
                const double coeff = -w * inv_p / evaluated;
                const double soft_p =
                    std::exp(sims[static_cast<std::size_t>(i) * n + p] - log_denom);
                dsims[static_cast<std::size_t>(i) * n + p] += coeff * (1.0 - soft_p);
                for (int j : negatives)
                    dsims[static_cast<std::size_t>(i) * n + j] -=
                        coeff * std::exp(sims[static_cast<std::size_t>(i) * n + j] - log_denom);
            }
        }
    }

    if (dfeatures) {
        std::vector<double> df(static_cast<std::size_t>(n) * c, 0.0);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) {
                const double g = dsims[static_cast<std::size_t>(a) * n + b];
                if (g == 0.0) continue;
                // s_ab = (f_a . f_b)/tau contributes to both rows
                for (int d = 0; d < c; ++d) {
                    df[static_cast<std::size_t>(a) * c + d] += g * features(b, d) / config.tau;
                    df[static_cast<std::size_t>(b) * c + d] += g * features(a, d) / config.tau;
                }
            }
        *dfeatures = Tensor({n, c});
        for (std::size_t i = 0; i < df.size(); ++i)
            dfeatures->v[i] = static_cast<float>(df[i]);
    }
    return loss;
}

double total_loss(double id_main, double id_attn, double ccl, const LossConfig& config) {
    return id_main + id_attn + static_cast<double>(config.lambda) * ccl;
}

} // namespace ifd
