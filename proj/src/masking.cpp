#include "ifd/masking.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace ifd {

Tensor clothing_region_mask(const GrayImage& parsing, const RegionVocabulary& vocab) {
    Tensor mask({parsing.height, parsing.width});
    std::set<int> unknown;
    for (int y = 0; y < parsing.height; ++y)
        for (int x = 0; x < parsing.width; ++x) {
            const int code = parsing.at(y, x);
            if (!vocab.has_code(code)) {
                unknown.insert(code);
                continue;
            }
            mask(y, x) = vocab.is_clothing(code) ? 1.0f : 0.0f;
        }
    if (!unknown.empty()) {
        std::string codes;
        for (int c : unknown) codes += (codes.empty() ? "" : ", ") + std::to_string(c);
        throw std::runtime_error("validation error: parsing contains region codes not in the vocabulary: " +
                                 codes);
    }
    return mask;
}

MaskedImage clothing_masked_image(const Sample& sample, const RegionVocabulary& vocab,
                                  float fill) {
    const Tensor mask = clothing_region_mask(sample.parsing, vocab);
    MaskedImage out;
    out.image = sample.image;
    const int h = sample.height(), w = sample.width();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask(y, x) != 0.0f)
                for (int c = 0; c < 3; ++c) out.image(c, y, x) = fill;
    return out;
}

Tensor downsample_mask(const Tensor& pixel_mask, int target_h, int target_w) {
    if (pixel_mask.rank() != 2)
        throw std::invalid_argument("downsample_mask: expected {H,W} mask, got " +
                                    pixel_mask.shape_str());
    if (target_h < 1 || target_w < 1)
        throw std::invalid_argument("downsample_mask: target dimensions must be >= 1");

    const int sh = pixel_mask.dim(0), sw = pixel_mask.dim(1);
    Tensor out({target_h, target_w});
    // Each output cell covers [i*sh/th, (i+1)*sh/th) x [j*sw/tw, (j+1)*sw/tw)
    // in source coordinates; source pixels contribute their exact overlap.
    for (int i = 0; i < target_h; ++i) {
        const double y0 = static_cast<double>(i) * sh / target_h;
        const double y1 = static_cast<double>(i + 1) * sh / target_h;
        for (int j = 0; j < target_w; ++j) {
            const double x0 = static_cast<double>(j) * sw / target_w;
            const double x1 = static_cast<double>(j + 1) * sw / target_w;
            double acc = 0.0;
            for (int y = static_cast<int>(y0); y < sh && y < y1; ++y) {
                const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                if (wy <= 0.0) continue;
                for (int x = static_cast<int>(x0); x < sw && x < x1; ++x) {
                    const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    if (wx <= 0.0) continue;
                    acc += wy * wx * pixel_mask(y, x);
                }
            }
            out(i, j) = static_cast<float>(acc / ((y1 - y0) * (x1 - x0)));
        }
    }
    return out;
}

ClothingMask make_clothing_mask(const GrayImage& parsing, const RegionVocabulary& vocab,
                                int feature_h, int feature_w) {
    ClothingMask m;
    m.pixel = clothing_region_mask(parsing, vocab);
    m.feature = downsample_mask(m.pixel, feature_h, feature_w);
    return m;
}

} // namespace ifd
