#pragma once

#include <cstdint>
#include <string>

#include "ifd/datamodel.hpp"

namespace ifd {

// Deterministic confounded pedestrian renderer. Identity lives in the head
// region (a per-identity 5x5 glyph in the face box plus an identity-scaled
// hair contour); clothing colors fill the body region and carry no identity
// signal when rho = 1 (every appearance gets a globally unique color pair).
// With rho < 1 an appearance falls back to a small shared palette with
// probability 1 - rho.
struct SynthConfig {
    int num_identities = 8;
    int clothings_per_identity = 3;
    int images_per_appearance = 10;
    int height = 128;
    int width = 64;
    float sigma = 0.05f;  // background noise level in [0,1]
    float rho = 1.0f;     // probability an appearance color is unique (confound strength)
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthSplit {
    std::string train_manifest;
    std::string query_manifest;
    std::string gallery_manifest;
};

// Renders every sample under out_dir (images/, parsing/) and writes a single
// manifest covering the whole set. Returns the manifest path.
std::string generate(const SynthConfig& config, const std::string& out_dir);

// Renders the dataset and splits it into protocol manifests: per identity
// the last clothing is held out of training entirely; its odd-indexed images
// form the query set and its even-indexed images join the gallery next to
// one training-clothing image per identity. Cameras are assigned per
// (clothing, image parity), so clothing-change positives are never blocked
// by the same-camera rule.
SynthSplit generate_split(const SynthConfig& config, const std::string& out_dir);

} // namespace ifd
