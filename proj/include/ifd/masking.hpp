#pragma once

#include "ifd/datamodel.hpp"
#include "ifd/tensor.hpp"

namespace ifd {

// Binary clothing mask at pixel resolution together with its soft
// feature-resolution form used for gating feature maps.
struct ClothingMask {
    Tensor pixel;    // {H_img, W_img}, values exactly 0 or 1
    Tensor feature;  // {H, W}, values in [0,1], area-average of pixel
};

struct MaskedImage {
    Tensor image;  // {3, H_img, W_img}
};

// 1 where the parsing label is a clothing category, 0 elsewhere. Raises a
// validation error listing any parsing codes missing from the vocabulary.
Tensor clothing_region_mask(const GrayImage& parsing, const RegionVocabulary& vocab);

// Replaces clothing pixels (all channels) with `fill`; everything else is
// copied bit-identically from the source image.
MaskedImage clothing_masked_image(const Sample& sample, const RegionVocabulary& vocab,
                                  float fill = 0.0f);

// Area-average pooling of a pixel mask onto a target grid. Output cells hold
// the exact fractional coverage, so the mean is preserved whenever the
// target dimensions divide the source dimensions.
Tensor downsample_mask(const Tensor& pixel_mask, int target_h, int target_w);

ClothingMask make_clothing_mask(const GrayImage& parsing, const RegionVocabulary& vocab,
                                int feature_h, int feature_w);

} // namespace ifd
