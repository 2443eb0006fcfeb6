#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ifd/image_io.hpp"
#include "ifd/tensor.hpp"

namespace ifd {

// Parsing region vocabulary: names -> integer codes plus the subset of codes
// counted as clothing. Hair and face are structurally barred from the
// clothing set.
struct RegionVocabulary {
    std::map<std::string, int> labels;
    std::set<int> clothing_set;

    bool is_clothing(int code) const { return clothing_set.count(code) != 0; }
    bool has_code(int code) const;
    int code(const std::string& name) const;
    void validate() const;

    // {background:0, hair:1, face:2, upper-clothes:3, pants:4, skirt:5,
    //  arms:6, legs:7, shoes:8}, clothing = {3,4,5}
    static RegionVocabulary default_vocabulary();
    static RegionVocabulary load(const std::string& path);
    void save(const std::string& path) const;
};

// One pedestrian image: RGB pixels in [0,1], per-pixel parsing labels, and
// the (identity, clothing, camera) metadata. (identity, clothing) jointly
// identify an appearance; clothing labels are scoped per identity.
struct Sample {
    Tensor image;       // {3,H,W}
    GrayImage parsing;  // H x W region codes
    int identity = 0;
    int clothing = 0;
    int camera = 0;
    std::string image_path;    // manifest-relative
    std::string parsing_path;

    int height() const { return image.dim(1); }
    int width() const { return image.dim(2); }
};

// Globally unique appearance id for an (identity, clothing) pair.
inline std::uint64_t appearance_id(int identity, int clothing) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(identity)) << 32) |
           static_cast<std::uint32_t>(clothing);
}

struct DatasetIndex {
    std::vector<Sample> samples;
    std::map<int, std::vector<int>> by_identity;                 // identity -> sample positions
    std::map<std::uint64_t, std::vector<int>> by_appearance;     // appearance -> sample positions

    std::size_t size() const { return samples.size(); }
    void add(Sample s);
    void rebuild_buckets();
    std::vector<int> identities() const;
};

// Manifest: UTF-8 text, one tab-separated record per line in the order
// image-path, parsing-path, identity, clothing, camera. '#' lines are
// comments. Paths are resolved against root_path.
DatasetIndex load_dataset(const std::string& root_path, const std::string& manifest_path);

// Metadata-only variant used where pixel data is not needed (counting,
// splitting, manifest round-trips).
DatasetIndex load_manifest(const std::string& root_path, const std::string& manifest_path,
                           bool load_pixels);

void write_manifest(const DatasetIndex& index, const std::string& manifest_path);

struct SplitRule {
    enum class Kind { ByCamera, AppearanceHoldout };
    Kind kind = Kind::ByCamera;
    int query_camera = 0;       // ByCamera: this camera becomes the query side
    int holdout = 1;            // AppearanceHoldout: samples per appearance moved to query
    std::uint64_t seed = 0;
};

// Splits into disjoint query/gallery sets. Every query identity must appear
// in the gallery, otherwise a protocol error is raised.
std::pair<DatasetIndex, DatasetIndex> split_query_gallery(const DatasetIndex& index,
                                                          const SplitRule& rule);

} // namespace ifd
