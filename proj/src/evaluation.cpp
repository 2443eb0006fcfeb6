#include "ifd/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ifd/kernels.hpp"
#include "ifd/masking.hpp"

namespace ifd {

EvalMode parse_eval_mode(const std::string& name) {
    if (name == "general") return EvalMode::General;
    if (name == "sc" || name == "same-clothing") return EvalMode::SameClothing;
    if (name == "cc" || name == "clothing-change") return EvalMode::ClothingChange;
    throw std::invalid_argument("unknown eval mode '" + name + "' (expected general|sc|cc)");
}

const char* eval_mode_name(EvalMode m) {
    switch (m) {
    case EvalMode::General: return "general";
    case EvalMode::SameClothing: return "same-clothing";
    case EvalMode::ClothingChange: return "clothing-change";
    }
    return "?";
}

std::vector<EvalRecord> extract_features(DualStreamModel& model, const DatasetIndex& dataset,
                                         const RegionVocabulary& vocab) {
    std::vector<EvalRecord> records;
    records.reserve(dataset.size());
    const bool needs_mask = model.attention_stream() != nullptr;
    const int batch_size = 16;
    for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
        const int n = static_cast<int>(std::min<std::size_t>(batch_size, dataset.size() - start));
        const Sample& first = dataset.samples[start];
        Tensor images({n, 3, first.height(), first.width()});
        Tensor masked = needs_mask ? Tensor({n, 3, first.height(), first.width()}) : Tensor();
        for (int i = 0; i < n; ++i) {
            const Sample& s = dataset.samples[start + i];
            if (s.height() != first.height() || s.width() != first.width())
                throw std::runtime_error("validation error: mixed image sizes in evaluation set");
            std::copy(s.image.v.begin(), s.image.v.end(),
                      images.v.begin() + static_cast<std::size_t>(i) * s.image.numel());
            if (needs_mask) {
                const Tensor m = clothing_masked_image(s, vocab).image;
                std::copy(m.v.begin(), m.v.end(),
                          masked.v.begin() + static_cast<std::size_t>(i) * m.numel());
            }
        }
        Tensor features = model.extract_features(images, masked);
        for (int i = 0; i < n; ++i) {
            const Sample& s = dataset.samples[start + i];
            EvalRecord r;
            r.feature.assign(features.v.begin() + static_cast<std::size_t>(i) * features.dim(1),
                             features.v.begin() + static_cast<std::size_t>(i + 1) * features.dim(1));
            r.identity = s.identity;
            r.clothing = s.clothing;
            r.camera = s.camera;
            records.push_back(std::move(r));
        }
    }
    return records;
}

Tensor distance_matrix(const std::vector<EvalRecord>& query,
                       const std::vector<EvalRecord>& gallery) {
    if (query.empty() || gallery.empty())
        throw std::invalid_argument("distance_matrix: query and gallery must be non-empty");
    const int c = static_cast<int>(query[0].feature.size());
    for (const auto& r : query)
        if (static_cast<int>(r.feature.size()) != c)
            throw std::invalid_argument("distance_matrix: inconsistent feature dimensions");
    for (const auto& r : gallery)
        if (static_cast<int>(r.feature.size()) != c)
            throw std::invalid_argument("distance_matrix: query dimension " + std::to_string(c) +
                                        " != gallery dimension " +
                                        std::to_string(r.feature.size()));

    Tensor qm({static_cast<int>(query.size()), c}), gm({static_cast<int>(gallery.size()), c});
    for (std::size_t i = 0; i < query.size(); ++i)
        std::copy(query[i].feature.begin(), query[i].feature.end(),
                  qm.v.begin() + i * static_cast<std::size_t>(c));
    for (std::size_t j = 0; j < gallery.size(); ++j)
        std::copy(gallery[j].feature.begin(), gallery[j].feature.end(),
                  gm.v.begin() + j * static_cast<std::size_t>(c));
    Tensor d({qm.dim(0), gm.dim(0)});
    kernels::distance_matrix(qm.data(), gm.data(), d.data(), qm.dim(0), gm.dim(0), c);
    return d;
}

GalleryMask valid_gallery_mask(const EvalRecord& q, const std::vector<EvalRecord>& gallery,
                               const EvalProtocol& protocol) {
    GalleryMask m;
    m.valid.resize(gallery.size());
    m.positive.resize(gallery.size());
    for (std::size_t j = 0; j < gallery.size(); ++j) {
        const EvalRecord& g = gallery[j];
        const bool same_id = g.identity == q.identity;
        const bool same_clothing = same_id && g.clothing == q.clothing;
        bool valid = true;
        if (protocol.same_camera_exclusion && same_id && g.camera == q.camera) valid = false;
        if (protocol.mode == EvalMode::SameClothing && same_id && !same_clothing) valid = false;
        if (protocol.mode == EvalMode::ClothingChange && same_clothing) valid = false;
        m.valid[j] = valid;
        m.positive[j] = valid && same_id;
    }
    return m;
}

EvalResult cmc_map(const Tensor& distmat, const std::vector<EvalRecord>& query,
                   const std::vector<EvalRecord>& gallery, const EvalProtocol& protocol,
                   int max_rank) {
    if (query.empty() || gallery.empty())
        throw std::invalid_argument("cmc_map: query and gallery must be non-empty");
    if (distmat.rank() != 2 || distmat.dim(0) != static_cast<int>(query.size()) ||
        distmat.dim(1) != static_cast<int>(gallery.size()))
        throw std::invalid_argument("cmc_map: distance matrix shape " + distmat.shape_str() +
                                    " does not match query/gallery sizes");

    EvalResult result;
    result.cmc.assign(static_cast<std::size_t>(max_rank), 0.0);
    double ap_sum = 0.0;

    for (std::size_t qi = 0; qi < query.size(); ++qi) {
        const GalleryMask mask = valid_gallery_mask(query[qi], gallery, protocol);
        std::vector<int> order;
        order.reserve(gallery.size());
        for (std::size_t j = 0; j < gallery.size(); ++j)
            if (mask.valid[j]) order.push_back(static_cast<int>(j));
        bool has_positive = false;
        for (int j : order)
            if (mask.positive[static_cast<std::size_t>(j)]) {
                has_positive = true;
                break;
            }
        if (!has_positive) {
            ++result.excluded_queries;
            continue;
        }
        ++result.evaluable_queries;

        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return distmat(static_cast<int>(qi), a) < distmat(static_cast<int>(qi), b);
        });

        int hits = 0;
        double ap = 0.0;
        int total_positives = 0;
        for (std::size_t rank = 0; rank < order.size(); ++rank) {
            if (mask.positive[static_cast<std::size_t>(order[rank])]) {
                if (hits == 0)
                    for (int k = static_cast<int>(rank); k < max_rank; ++k)
                        result.cmc[static_cast<std::size_t>(k)] += 1.0;
                ++hits;
                ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
                ++total_positives;
            }
        }
        ap_sum += ap / total_positives;
    }

    if (result.evaluable_queries == 0)
        throw std::runtime_error("protocol error: no evaluable queries in " +
                                 std::string(eval_mode_name(protocol.mode)) + " mode");
    for (double& v : result.cmc) v /= result.evaluable_queries;
    result.map = ap_sum / result.evaluable_queries;
    return result;
}

std::string format_results(EvalMode mode, const EvalResult& r) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "mode = " << eval_mode_name(mode) << "\n";
    out << "rank1 = " << 100.0 * r.rank(1) << "\n";
    out << "rank5 = " << 100.0 * r.rank(5) << "\n";
    out << "rank10 = " << 100.0 * r.rank(10) << "\n";
    out << "mAP = " << 100.0 * r.map << "\n";
    out << "evaluable-queries = " << r.evaluable_queries << "\n";
    out << "excluded-queries = " << r.excluded_queries << "\n";
    return out.str();
}

} // namespace ifd
