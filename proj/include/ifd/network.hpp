#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ifd/layers.hpp"
#include "ifd/rng.hpp"
#include "ifd/tensor.hpp"

namespace ifd {

struct BackboneConfig {
    std::string arch = "small-conv";     // small-conv | resnet50
    std::vector<int> widths = {16, 32, 64, 64};
    int output_stride = 8;
    int ikt_kernel = 7;                  // odd

    int feature_channels() const;
    void validate() const;
};

// Feature extractor for one stream. Both streams are built from the same
// config but never share weights.
class Backbone {
public:
    Backbone(const BackboneConfig& config, Rng& rng);

    Tensor forward(const Tensor& images, bool train);  // {N,3,H,W} -> {N,C,h,w}
    Tensor backward(const Tensor& dfeatures);
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays);

    int channels() const { return channels_; }
    int stride() const { return stride_; }

private:
    Sequential body_;
    int channels_ = 0;
    int stride_ = 1;
};

// Spatial attention from pooled channel statistics: per position the channel
// max and channel mean are stacked, convolved with a kxk kernel, and squashed
// through a sigmoid. Output values are strictly inside (0,1).
class IKTModule {
public:
    IKTModule(int kernel, Rng& rng);

    Tensor forward(const Tensor& fa);        // {N,C,H,W} -> {N,1,H,W}
    Tensor backward(const Tensor& dwi);      // -> dFa
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays);

    Conv2d conv;  // {1,2,k,k} + bias
    int kernel;

private:
    Tensor cached_y_;
    std::vector<std::int32_t> argmax_;
    std::vector<int> in_shape_;
};

// Global-average-pooled feature plus linear identity logits.
class IdentityHead {
public:
    IdentityHead(int channels, int num_identities, Rng& rng);

    struct Output {
        Tensor pooled;  // {N,C}
        Tensor logits;  // {N,num_identities}
    };
    Output forward(const Tensor& features, bool train);
    // Either gradient may be empty (treated as zero).
    Tensor backward(const Tensor& dpooled, const Tensor& dlogits);
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays);

    Linear& fc() { return fc_; }

    int channels, num_identities;

private:
    GlobalAvgPool pool_;
    Linear fc_;
    std::vector<int> feat_shape_;
};

// Clothing-feature path: gate features with the clothing mask, batch
// normalize, pool, L2-normalize. Rows that pool to zero stay zero.
class CBDPath {
public:
    explicit CBDPath(int channels);

    Tensor forward(const Tensor& f_rg, const Tensor& w_c, bool train);  // -> {N,C}
    Tensor backward(const Tensor& df_c);                                // -> dF_rg
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays);

    BatchNorm2d bn;

private:
    GlobalAvgPool pool_;
    Tensor cached_wc_, cached_fc_in_, cached_normed_;
    std::vector<float> norms_;
};

// L2-normalize each row in place; returns the pre-normalization norms.
// Zero rows (norm < 1e-12) are left as zero vectors.
std::vector<float> l2_normalize_rows(Tensor& rows);

enum class Variant { Baseline, IKT, CBD, IFDCL, IFD };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant v);
inline bool variant_has_attention(Variant v) {
    return v == Variant::IKT || v == Variant::IFDCL || v == Variant::IFD;
}
inline bool variant_has_cbd(Variant v) {
    return v == Variant::CBD || v == Variant::IFDCL || v == Variant::IFD;
}

struct ModelConfig {
    BackboneConfig backbone;
    int num_identities = 1;
    Variant variant = Variant::IFD;
    std::uint64_t init_seed = 0;
};

// The dual-stream assembly. Which pieces exist depends on the variant:
//   baseline: main backbone + main head (features = F_g)
//   ikt:      + attention backbone, attention module, attention head
//   cbd:      main backbone + main head + clothing path gated on F_g
//   ifd-cl / ifd: everything (the two differ only in the loss weighting)
class DualStreamModel {
public:
    explicit DualStreamModel(const ModelConfig& config);

    struct Output {
        Tensor logits_main;   // {N,ids}
        Tensor logits_attn;   // empty unless the attention stream exists
        Tensor f_c;           // empty unless the clothing path exists
        Tensor w_i;           // {N,1,h,w}, empty unless the attention stream exists
        Tensor pooled_main;   // {N,C} identity feature before the classifier
    };

    // masked and w_c may be empty tensors for variants that do not use them.
    Output forward(const Tensor& images, const Tensor& masked, const Tensor& w_c, bool train);
    void backward(const Tensor& dlogits_main, const Tensor& dlogits_attn, const Tensor& df_c);

    // L2-normalized main-stream identity features for retrieval.
    Tensor extract_features(const Tensor& images, const Tensor& masked);
    // Attention maps for inspection; empty when no attention stream exists.
    Tensor attention_maps(const Tensor& masked);

    void collect(std::vector<ParamRef>* params, std::vector<ArrayRef>* arrays);
    std::vector<ParamRef> all_params();
    std::vector<ParamRef> attention_params();  // attention backbone + its head
    std::vector<ParamRef> trainable_params();  // honors the frozen-attention flag
    std::vector<ArrayRef> all_arrays();

    const ModelConfig& config() const { return config_; }
    int feature_channels() const { return config_.backbone.feature_channels(); }
    int feature_stride() const { return main_->stride(); }

    Backbone& main_stream() { return *main_; }
    Backbone* attention_stream() { return attn_.get(); }
    IKTModule* ikt() { return ikt_.get(); }
    IdentityHead& main_head() { return *main_head_; }
    IdentityHead* attention_head() { return attn_head_.get(); }
    CBDPath* cbd() { return cbd_.get(); }

private:
    ModelConfig config_;
    std::unique_ptr<Backbone> main_;
    std::unique_ptr<Backbone> attn_;
    std::unique_ptr<IKTModule> ikt_;
    std::unique_ptr<IdentityHead> main_head_;
    std::unique_ptr<IdentityHead> attn_head_;
    std::unique_ptr<CBDPath> cbd_;
    Tensor cached_wi_, cached_fg_;
    bool attn_frozen_ = false;

public:
    // Phase-2 option: keep the attention stream fixed while the rest trains.
    void set_attention_frozen(bool frozen) { attn_frozen_ = frozen; }
    bool attention_frozen() const { return attn_frozen_; }
};

// --- Single-map convenience forms of the core operations ---

// {C,H,W} -> {1,H,W}; raises a numeric error on NaN input.
Tensor ikt_attention(const Tensor& f_a, IKTModule& module);

// F_rg[c,h,w] = W_I[h,w] * F_g[c,h,w]
Tensor apply_attention(const Tensor& w_i, const Tensor& f_g);

// Mask-gate, batch-normalize, pool and L2-normalize a single feature map.
Tensor clothing_feature(const Tensor& f_rg, const Tensor& w_c, CBDPath& path, bool train);

// Nearest-neighbour upsample of a {1,h,w} (or {h,w}) map to image size.
Tensor upsample_nearest(const Tensor& map, int out_h, int out_w);

} // namespace ifd
