#pragma once

#include <string>
#include <vector>

#include "ifd/datamodel.hpp"
#include "ifd/network.hpp"
#include "ifd/tensor.hpp"

namespace ifd {

struct EvalRecord {
    std::vector<float> feature;  // L2-normalized (or all-zero sentinel)
    int identity = 0;
    int clothing = 0;
    int camera = 0;
};

enum class EvalMode { General, SameClothing, ClothingChange };

EvalMode parse_eval_mode(const std::string& name);
const char* eval_mode_name(EvalMode m);

struct EvalProtocol {
    EvalMode mode = EvalMode::General;
    bool same_camera_exclusion = true;
};

// One record per sample, in dataset order. The model runs in eval state.
std::vector<EvalRecord> extract_features(DualStreamModel& model, const DatasetIndex& dataset,
                                         const RegionVocabulary& vocab);

// Cosine distance d = 1 - <f_q, f_g> on normalized features.
Tensor distance_matrix(const std::vector<EvalRecord>& query,
                       const std::vector<EvalRecord>& gallery);

struct GalleryMask {
    std::vector<char> valid;     // item participates in the ranking
    std::vector<char> positive;  // item counts as a correct match
};

// Same-camera same-identity items are always invalid. same-clothing mode
// additionally invalidates same-identity different-clothing items;
// clothing-change mode invalidates same-identity same-clothing items.
// Positives are the valid same-identity items.
GalleryMask valid_gallery_mask(const EvalRecord& q, const std::vector<EvalRecord>& gallery,
                               const EvalProtocol& protocol);

struct EvalResult {
    std::vector<double> cmc;  // cmc[k-1] = rank-k accuracy, k = 1..max_rank
    double map = 0.0;
    int evaluable_queries = 0;
    int excluded_queries = 0;

    double rank(int k) const { return cmc.at(static_cast<std::size_t>(k) - 1); }
};

// CMC/mAP over valid gallery items, ranked by ascending distance with ties
// broken by gallery index. Queries without any valid positive are excluded
// from the averages and reported.
EvalResult cmc_map(const Tensor& distmat, const std::vector<EvalRecord>& query,
                   const std::vector<EvalRecord>& gallery, const EvalProtocol& protocol,
                   int max_rank = 10);

// Results block: mode, rank1/5/10, mAP (percent), evaluable/excluded counts.
std::string format_results(EvalMode mode, const EvalResult& r);

} // namespace ifd
