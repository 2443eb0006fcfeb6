#include "ifd/network.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace ifd {

namespace k = kernels;

int BackboneConfig::feature_channels() const {
    if (arch == "resnet50") return 2048;
    return widths.empty() ? 0 : widths.back();
}

void BackboneConfig::validate() const {
    if (arch != "small-conv" && arch != "resnet50")
        throw std::invalid_argument("backbone: unknown architecture '" + arch + "'");
    if (ikt_kernel < 1 || ikt_kernel % 2 == 0)
        throw std::invalid_argument("backbone: ikt_kernel must be odd, got " +
                                    std::to_string(ikt_kernel));
    if (arch == "small-conv") {
        if (widths.empty()) throw std::invalid_argument("backbone: small-conv needs stage widths");
        int s = output_stride, stages = 0;
        while (s > 1) {
            if (s % 2) throw std::invalid_argument("backbone: output_stride must be a power of two");
            s /= 2;
            ++stages;
        }
        if (stages > static_cast<int>(widths.size()))
            throw std::invalid_argument("backbone: output_stride " + std::to_string(output_stride) +
                                        " needs more stages than the " +
                                        std::to_string(widths.size()) + " configured widths");
    } else if (output_stride != 16 && output_stride != 32) {
        throw std::invalid_argument("backbone: resnet50 supports output_stride 16 or 32");
    }
}

Backbone::Backbone(const BackboneConfig& config, Rng& rng) {
    config.validate();
    if (config.arch == "small-conv") {
        int stride2_left = 0;
        for (int s = config.output_stride; s > 1; s /= 2) ++stride2_left;
        int in_ch = 3;
        for (std::size_t i = 0; i < config.widths.size(); ++i) {
            const int stride = stride2_left > 0 ? 2 : 1;
            if (stride2_left > 0) --stride2_left;
            auto stage = std::make_unique<Sequential>();
            stage->add("conv", std::make_unique<Conv2d>(in_ch, config.widths[i], 3, stride, 1,
                                                        false, rng));
            stage->add("bn", std::make_unique<BatchNorm2d>(config.widths[i]));
            stage->add("relu", std::make_unique<ReLU>());
            body_.add("stage" + std::to_string(i), std::move(stage));
            in_ch = config.widths[i];
        }
        channels_ = config.widths.back();
        stride_ = config.output_stride;
    } else {
        // ResNet-50: stem (stride 4) + bottleneck stages 3/4/6/3. The last
        // stage keeps stride 1 when output_stride is 16.
        auto stem = std::make_unique<Sequential>();
        stem->add("conv", std::make_unique<Conv2d>(3, 64, 7, 2, 3, false, rng));
        stem->add("bn", std::make_unique<BatchNorm2d>(64));
        stem->add("relu", std::make_unique<ReLU>());
        stem->add("pool", std::make_unique<MaxPool2d>(3, 2, 1));
        body_.add("stem", std::move(stem));

        const int blocks[4] = {3, 4, 6, 3};
        const int mids[4] = {64, 128, 256, 512};
        int in_ch = 64;
        for (int s = 0; s < 4; ++s) {
            const int out_ch = mids[s] * 4;
            int first_stride = s == 0 ? 1 : 2;
            if (s == 3 && config.output_stride == 16) first_stride = 1;
            auto stage = std::make_unique<Sequential>();
            for (int b = 0; b < blocks[s]; ++b) {
                stage->add("block" + std::to_string(b),
                           std::make_unique<Bottleneck>(in_ch, mids[s], out_ch,
                                                        b == 0 ? first_stride : 1, rng));
                in_ch = out_ch;
            }
            body_.add("layer" + std::to_string(s + 1), std::move(stage));
        }
        channels_ = 2048;
        stride_ = config.output_stride;
    }
}

Tensor Backbone::forward(const Tensor& images, bool train) {
    if (images.rank() != 4 || images.dim(1) != 3)
        throw std::invalid_argument("backbone: expected {N,3,H,W} images, got " +
                                    images.shape_str());
    if (images.dim(2) < stride_ || images.dim(3) < stride_)
        throw std::invalid_argument("backbone: image " + images.shape_str() +
                                    " is smaller than the output stride " +
                                    std::to_string(stride_));
    return body_.forward(images, train);
}

Tensor Backbone::backward(const Tensor& dfeatures) { return body_.backward(dfeatures); }

void Backbone::collect(const std::string& prefix, std::vector<ParamRef>* params,
                       std::vector<ArrayRef>* arrays) {
    body_.collect(prefix, params, arrays);
}

IKTModule::IKTModule(int kernel_, Rng& rng)
    : conv(2, 1, kernel_, 1, (kernel_ - 1) / 2, true, rng), kernel(kernel_) {
    if (kernel_ % 2 == 0)
        throw std::invalid_argument("ikt: kernel size must be odd, got " + std::to_string(kernel_));
    // start with the gate mostly closed: regions earn attention through the
    // pooled statistics instead of an always-open bias
    conv.bias.fill(-2.0f);
}

Tensor IKTModule::forward(const Tensor& fa) {
    if (fa.rank() != 4) throw std::invalid_argument("ikt: expected {N,C,H,W} input");
    for (float v : fa.v)
        if (std::isnan(v)) throw std::runtime_error("numeric error: NaN in attention-stream features");
    in_shape_ = fa.shape;
    const int n = fa.dim(0), c = fa.dim(1), h = fa.dim(2), w = fa.dim(3);
    Tensor mm({n, 2, h, w});
    argmax_.assign(static_cast<std::size_t>(n) * h * w, 0);
    k::channel_maxmean_forward(fa.data(), mm.data(), argmax_.data(), n, c, h, w);
    Tensor z = conv.forward(mm, true);
    Tensor y(z.shape);
    k::sigmoid_forward(z.data(), y.data(), y.numel());
    // keep the map strictly inside (0,1) where float rounding saturates
    const float lo = std::numeric_limits<float>::min();
    const float hi = std::nextafter(1.0f, 0.0f);
    for (float& v : y.v) v = std::min(hi, std::max(lo, v));
    cached_y_ = y;
    return y;
}

Tensor IKTModule::backward(const Tensor& dwi) {
    Tensor dz(cached_y_.shape);
    k::sigmoid_backward(cached_y_.data(), dwi.data(), dz.data(), dz.numel());
    Tensor dmm = conv.backward(dz);
    Tensor dfa(in_shape_);
    k::channel_maxmean_backward(dmm.data(), argmax_.data(), dfa.data(), in_shape_[0],
                                in_shape_[1], in_shape_[2], in_shape_[3]);
    return dfa;
}

void IKTModule::collect(const std::string& prefix, std::vector<ParamRef>* params,
                        std::vector<ArrayRef>* arrays) {
    conv.collect(join_path(prefix, "conv"), params, arrays);
}

IdentityHead::IdentityHead(int channels_, int num_identities_, Rng& rng)
    : channels(channels_), num_identities(num_identities_), fc_(channels_, num_identities_, rng) {}

IdentityHead::Output IdentityHead::forward(const Tensor& features, bool train) {
    feat_shape_ = features.shape;
    Output out;
    out.pooled = pool_.forward(features, train);
    out.logits = fc_.forward(out.pooled, train);
    return out;
}

Tensor IdentityHead::backward(const Tensor& dpooled, const Tensor& dlogits) {
    Tensor dp = dlogits.numel() ? fc_.backward(dlogits) : Tensor({feat_shape_[0], channels});
    if (dpooled.numel())
        for (std::size_t i = 0; i < dp.numel(); ++i) dp.v[i] += dpooled.v[i];
    return pool_.backward(dp);
}

void IdentityHead::collect(const std::string& prefix, std::vector<ParamRef>* params,
                           std::vector<ArrayRef>* arrays) {
    fc_.collect(join_path(prefix, "fc"), params, arrays);
}

std::vector<float> l2_normalize_rows(Tensor& rows) {
    const int n = rows.dim(0), c = rows.dim(1);
    std::vector<float> norms(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int j = 0; j < c; ++j) sq += static_cast<double>(rows(i, j)) * rows(i, j);
        const double norm = std::sqrt(sq);
        norms[i] = static_cast<float>(norm);
        if (norm >= 1e-12)
            for (int j = 0; j < c; ++j) rows(i, j) = static_cast<float>(rows(i, j) / norm);
        else
            for (int j = 0; j < c; ++j) rows(i, j) = 0.0f;
    }
    return norms;
}

CBDPath::CBDPath(int channels) : bn(channels) {}

Tensor CBDPath::forward(const Tensor& f_rg, const Tensor& w_c, bool train) {
    if (w_c.rank() != 4 || w_c.dim(1) != 1 || w_c.dim(2) != f_rg.dim(2) ||
        w_c.dim(3) != f_rg.dim(3) || w_c.dim(0) != f_rg.dim(0))
        throw std::invalid_argument("clothing_feature: mask " + w_c.shape_str() +
                                    " does not match features " + f_rg.shape_str());
    bool any = false;
    for (float v : w_c.v)
        if (v != 0.0f) {
            any = true;
            break;
        }
    if (!any)
        std::cerr << "warning: clothing mask is all-zero over the batch; "
                     "clothing features degenerate to zero vectors\n";

    cached_wc_ = w_c;
    cached_fc_in_ = f_rg;
    const int n = f_rg.dim(0), c = f_rg.dim(1), h = f_rg.dim(2), w = f_rg.dim(3);
    Tensor fc({n, c, h, w});
    k::broadcast_mul_forward(w_c.data(), f_rg.data(), fc.data(), n, c, h, w);
    Tensor pooled = pool_.forward(bn.forward(fc, train), train);
    norms_ = l2_normalize_rows(pooled);
    cached_normed_ = pooled;
    return pooled;
}

Tensor CBDPath::backward(const Tensor& df_c) {
    const int n = df_c.dim(0), c = df_c.dim(1);
    // Through y = v/||v||: dv = (dy - y (y.dy)) / ||v||; zero rows get zero.
    Tensor dpooled({n, c});
    for (int i = 0; i < n; ++i) {
        if (norms_[static_cast<std::size_t>(i)] < 1e-12f) continue;
        double dot = 0.0;
        for (int j = 0; j < c; ++j)
            dot += static_cast<double>(cached_normed_(i, j)) * df_c(i, j);
        for (int j = 0; j < c; ++j)
            dpooled(i, j) = static_cast<float>(
                (df_c(i, j) - cached_normed_(i, j) * dot) / norms_[static_cast<std::size_t>(i)]);
    }
    Tensor dfc = bn.backward(pool_.backward(dpooled));
    Tensor dfrg(cached_fc_in_.shape);
    k::broadcast_mul_backward(cached_wc_.data(), cached_fc_in_.data(), dfc.data(), nullptr,
                              dfrg.data(), dfrg.dim(0), dfrg.dim(1), dfrg.dim(2), dfrg.dim(3));
    return dfrg;
}

void CBDPath::collect(const std::string& prefix, std::vector<ParamRef>* params,
                      std::vector<ArrayRef>* arrays) {
    bn.collect(join_path(prefix, "bn"), params, arrays);
}

Variant parse_variant(const std::string& name) {
    if (name == "baseline") return Variant::Baseline;
    if (name == "ikt") return Variant::IKT;
    if (name == "cbd") return Variant::CBD;
    if (name == "ifd-cl") return Variant::IFDCL;
    if (name == "ifd") return Variant::IFD;
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected baseline|ikt|cbd|ifd-cl|ifd)");
}

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::IKT: return "ikt";
    case Variant::CBD: return "cbd";
    case Variant::IFDCL: return "ifd-cl";
    case Variant::IFD: return "ifd";
    }
    return "?";
}

DualStreamModel::DualStreamModel(const ModelConfig& config) : config_(config) {
    config_.backbone.validate();
    Rng rng(config.init_seed);
    const int c = config_.backbone.feature_channels();
    main_ = std::make_unique<Backbone>(config_.backbone, rng);
    main_head_ = std::make_unique<IdentityHead>(c, config.num_identities, rng);
    if (variant_has_attention(config.variant)) {
        attn_ = std::make_unique<Backbone>(config_.backbone, rng);
        attn_head_ = std::make_unique<IdentityHead>(c, config.num_identities, rng);
        ikt_ = std::make_unique<IKTModule>(config_.backbone.ikt_kernel, rng);
    }
    if (variant_has_cbd(config.variant)) cbd_ = std::make_unique<CBDPath>(c);
}

DualStreamModel::Output DualStreamModel::forward(const Tensor& images, const Tensor& masked,
                                                 const Tensor& w_c, bool train) {
    Output out;
    Tensor fg = main_->forward(images, train);
    Tensor features = fg;
    if (attn_) {
        const bool attn_train = train && !attn_frozen_;
        Tensor fa = attn_->forward(masked, attn_train);
        out.w_i = ikt_->forward(fa);
        Tensor frg(fg.shape);
        k::broadcast_mul_forward(out.w_i.data(), fg.data(), frg.data(), fg.dim(0), fg.dim(1),
                                 fg.dim(2), fg.dim(3));
        cached_fg_ = fg;
        cached_wi_ = out.w_i;
        features = frg;
        auto ah = attn_head_->forward(fa, attn_train);
        out.logits_attn = ah.logits;
    }
    auto mh = main_head_->forward(features, train);
    out.logits_main = mh.logits;
    out.pooled_main = mh.pooled;
    if (cbd_) out.f_c = cbd_->forward(features, w_c, train);
    return out;
}

void DualStreamModel::backward(const Tensor& dlogits_main, const Tensor& dlogits_attn,
                               const Tensor& df_c) {
    Tensor dfeat = main_head_->backward(Tensor(), dlogits_main);
    if (cbd_ && df_c.numel()) {
        Tensor extra = cbd_->backward(df_c);
        for (std::size_t i = 0; i < dfeat.numel(); ++i) dfeat.v[i] += extra.v[i];
    }
    if (attn_) {
        // dfeat is dF_rg; split across the product F_rg = W_I (x) F_g.
        Tensor dwi({dfeat.dim(0), 1, dfeat.dim(2), dfeat.dim(3)});
        Tensor dfg(dfeat.shape);
        k::broadcast_mul_backward(cached_wi_.data(), cached_fg_.data(), dfeat.data(), dwi.data(),
                                  dfg.data(), dfeat.dim(0), dfeat.dim(1), dfeat.dim(2),
                                  dfeat.dim(3));
        main_->backward(dfg);
        if (!attn_frozen_) {
            Tensor dfa = ikt_->backward(dwi);
            if (dlogits_attn.numel()) {
                Tensor dfa_head = attn_head_->backward(Tensor(), dlogits_attn);
                for (std::size_t i = 0; i < dfa.numel(); ++i) dfa.v[i] += dfa_head.v[i];
            }
            attn_->backward(dfa);
        }
    } else {
        main_->backward(dfeat);
    }
}

Tensor DualStreamModel::extract_features(const Tensor& images, const Tensor& masked) {
    Tensor fg = main_->forward(images, false);
    Tensor features = fg;
    if (attn_) {
        Tensor fa = attn_->forward(masked, false);
        Tensor wi = ikt_->forward(fa);
        Tensor frg(fg.shape);
        k::broadcast_mul_forward(wi.data(), fg.data(), frg.data(), fg.dim(0), fg.dim(1),
                                 fg.dim(2), fg.dim(3));
        features = frg;
    }
    GlobalAvgPool pool;
    Tensor pooled = pool.forward(features, false);
    l2_normalize_rows(pooled);
    return pooled;
}

Tensor DualStreamModel::attention_maps(const Tensor& masked) {
    if (!attn_) return Tensor();
    Tensor fa = attn_->forward(masked, false);
    return ikt_->forward(fa);
}

void DualStreamModel::collect(std::vector<ParamRef>* params, std::vector<ArrayRef>* arrays) {
    main_->collect("main", params, arrays);
    main_head_->collect("main_head", params, arrays);
    if (attn_) {
        attn_->collect("attn", params, arrays);
        attn_head_->collect("attn_head", params, arrays);
        ikt_->collect("ikt", params, arrays);
    }
    if (cbd_) cbd_->collect("cbd", params, arrays);
}

std::vector<ParamRef> DualStreamModel::all_params() {
    std::vector<ParamRef> ps;
    collect(&ps, nullptr);
    return ps;
}

std::vector<ParamRef> DualStreamModel::attention_params() {
    std::vector<ParamRef> ps;
    if (attn_) {
        attn_->collect("attn", &ps, nullptr);
        attn_head_->collect("attn_head", &ps, nullptr);
    }
    return ps;
}

std::vector<ParamRef> DualStreamModel::trainable_params() {
    if (!attn_frozen_) return all_params();
    std::vector<ParamRef> ps;
    main_->collect("main", &ps, nullptr);
    main_head_->collect("main_head", &ps, nullptr);
    if (cbd_) cbd_->collect("cbd", &ps, nullptr);
    return ps;
}

std::vector<ArrayRef> DualStreamModel::all_arrays() {
    std::vector<ArrayRef> as;
    collect(nullptr, &as);
    return as;
}

Tensor ikt_attention(const Tensor& f_a, IKTModule& module) {
    if (f_a.rank() != 3) throw std::invalid_argument("ikt_attention: expected {C,H,W} map");
    Tensor batched({1, f_a.dim(0), f_a.dim(1), f_a.dim(2)});
    batched.v = f_a.v;
    Tensor out = module.forward(batched);
    Tensor map({1, out.dim(2), out.dim(3)});
    map.v = out.v;
    return map;
}

Tensor apply_attention(const Tensor& w_i, const Tensor& f_g) {
    if (w_i.rank() != 3 || f_g.rank() != 3 || w_i.dim(0) != 1 || w_i.dim(1) != f_g.dim(1) ||
        w_i.dim(2) != f_g.dim(2))
        throw std::invalid_argument("apply_attention: attention " + w_i.shape_str() +
                                    " does not match features " + f_g.shape_str());
    Tensor out(f_g.shape);
    k::broadcast_mul_forward(w_i.data(), f_g.data(), out.data(), 1, f_g.dim(0), f_g.dim(1),
                             f_g.dim(2));
    return out;
}

Tensor clothing_feature(const Tensor& f_rg, const Tensor& w_c, CBDPath& path, bool train) {
    if (f_rg.rank() != 3 || w_c.rank() != 2)
        throw std::invalid_argument("clothing_feature: expected {C,H,W} features and {H,W} mask");
    Tensor bf({1, f_rg.dim(0), f_rg.dim(1), f_rg.dim(2)});
    bf.v = f_rg.v;
    Tensor bw({1, 1, w_c.dim(0), w_c.dim(1)});
    bw.v = w_c.v;
    Tensor out = path.forward(bf, bw, train);
    Tensor vec({out.dim(1)});
    vec.v = out.v;
    return vec;
}

Tensor upsample_nearest(const Tensor& map, int out_h, int out_w) {
    int h, w;
    const float* src;
    if (map.rank() == 3 && map.dim(0) == 1) {
        h = map.dim(1);
        w = map.dim(2);
        src = map.data();
    } else if (map.rank() == 2) {
        h = map.dim(0);
        w = map.dim(1);
        src = map.data();
    } else {
        throw std::invalid_argument("upsample_nearest: expected {1,h,w} or {h,w} map");
    }
    Tensor out({out_h, out_w});
    for (int y = 0; y < out_h; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * h / out_h);
        for (int x = 0; x < out_w; ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x) * w / out_w);
            out(y, x) = src[static_cast<std::size_t>(sy) * w + sx];
        }
    }
    return out;
}

} // namespace ifd
