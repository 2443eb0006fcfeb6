#include "ifd/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ifd/checkpoint.hpp"
#include "ifd/masking.hpp"
#include "ifd/rng.hpp"

namespace ifd {

TrainConfig TrainConfig::from(const Config& config) {
    TrainConfig c;
    c.phase1_epochs = config.get_int("train.phase1_epochs");
    c.phase2_epochs = config.get_int("train.phase2_epochs");
    c.lr = static_cast<float>(config.get_float("train.lr"));
    c.weight_decay = static_cast<float>(config.get_float("train.weight_decay"));
    c.seed = static_cast<std::uint64_t>(config.get_int("train.seed"));
    c.freeze_attention = config.get_bool("train.freeze_attention");
    c.flip_augment = config.get_bool("train.flip_augment");
    c.loss = config.loss_config();
    c.sampler = config.sampler_config();
    c.backbone = config.backbone_config();
    c.validate();
    return c;
}

void TrainConfig::validate() const {
    if (phase1_epochs < 0 || phase2_epochs < 0)
        throw std::invalid_argument("train: epochs must be >= 0");
    if (!(lr >= 0.0f)) throw std::invalid_argument("train: learning rate must be non-negative");
    loss.validate();
    sampler.validate();
    backbone.validate();
}

void Adam::step(const std::vector<ParamRef>& params, float lr, float weight_decay) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (const ParamRef& p : params) {
        Tensor& m = m_[p.name];
        Tensor& v = v_[p.name];
        if (m.numel() != p.value->numel()) m = Tensor(p.value->shape);
        if (v.numel() != p.value->numel()) v = Tensor(p.value->shape);
        for (std::size_t i = 0; i < p.value->numel(); ++i) {
            const float g = p.grad->v[i];
            m.v[i] = beta1 * m.v[i] + (1.0f - beta1) * g;
            v.v[i] = beta2 * v.v[i] + (1.0f - beta2) * g * g;
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            double upd = lr * mhat / (std::sqrt(vhat) + eps);
            if (weight_decay > 0.0f) upd += static_cast<double>(lr) * weight_decay * p.value->v[i];
            p.value->v[i] -= static_cast<float>(upd);
        }
    }
}

PreparedData prepare_training_data(const DatasetIndex& index, const RegionVocabulary& vocab,
                                   int feature_stride) {
    if (index.size() == 0) throw std::invalid_argument("train: dataset is empty");
    PreparedData data;
    data.index = &index;

    for (const auto& [id, bucket] : index.by_identity) {
        const int next = static_cast<int>(data.id_remap.size());
        data.id_remap[id] = next;
    }
    data.num_identities = static_cast<int>(data.id_remap.size());

    std::map<std::uint64_t, int> app_remap;
    for (const auto& [app, bucket] : index.by_appearance) {
        const int next = static_cast<int>(app_remap.size());
        app_remap[app] = next;
    }

    const Sample& first = index.samples.front();
    data.feat_h = std::max(1, first.height() / feature_stride);
    data.feat_w = std::max(1, first.width() / feature_stride);

    data.images.reserve(index.size());
    data.masked.reserve(index.size());
    data.wc.reserve(index.size());
    for (const Sample& s : index.samples) {
        if (s.height() != first.height() || s.width() != first.width())
            throw std::runtime_error("validation error: training set mixes image sizes");
        data.images.push_back(s.image);
        data.masked.push_back(clothing_masked_image(s, vocab).image);
        Tensor fm = downsample_mask(clothing_region_mask(s.parsing, vocab), data.feat_h, data.feat_w);
        Tensor wc({1, data.feat_h, data.feat_w});
        wc.v = fm.v;
        data.wc.push_back(std::move(wc));
        data.id_labels.push_back(data.id_remap.at(s.identity));
        data.app_labels.push_back(app_remap.at(appearance_id(s.identity, s.clothing)));
    }
    return data;
}

TrainState init_train_state(const TrainConfig& config, Variant variant, int num_identities) {
    TrainState state;
    ModelConfig mc;
    mc.backbone = config.backbone;
    mc.num_identities = num_identities;
    mc.variant = variant;
    mc.init_seed = config.seed;
    state.model = std::make_unique<DualStreamModel>(mc);
    state.model->set_attention_frozen(false);
    state.sampler_rng_state = Rng(config.sampler.seed).state;
    state.aug_rng_state = Rng(config.seed ^ 0xF11Full).state;
    return state;
}

namespace {

Tensor flip_horizontal(const Tensor& t) {
    // {C,H,W}
    Tensor out(t.shape);
    const int c = t.dim(0), h = t.dim(1), w = t.dim(2);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out(ch, y, x) = t(ch, y, w - 1 - x);
    return out;
}

struct Batch {
    Tensor images, masked, wc;
    std::vector<int> ids, apps, positions;
};

Batch assemble_batch(const PreparedData& data, const std::vector<int>& positions, bool flip,
                     Rng& aug_rng, bool need_masked, bool need_wc) {
    const int n = static_cast<int>(positions.size());
    const Tensor& proto = data.images[static_cast<std::size_t>(positions[0])];
    Batch b;
    b.positions = positions;
    b.images = Tensor({n, 3, proto.dim(1), proto.dim(2)});
    if (need_masked) b.masked = Tensor({n, 3, proto.dim(1), proto.dim(2)});
    if (need_wc) b.wc = Tensor({n, 1, data.feat_h, data.feat_w});
    for (int i = 0; i < n; ++i) {
        const int pos = positions[static_cast<std::size_t>(i)];
        const bool do_flip = flip && aug_rng.uniform() < 0.5;
        auto blit = [&](Tensor& dst, const Tensor& src) {
            const Tensor used = do_flip ? flip_horizontal(src) : src;
            std::copy(used.v.begin(), used.v.end(),
                      dst.v.begin() + static_cast<std::size_t>(i) * used.numel());
        };
        blit(b.images, data.images[static_cast<std::size_t>(pos)]);
        if (need_masked) blit(b.masked, data.masked[static_cast<std::size_t>(pos)]);
        if (need_wc) blit(b.wc, data.wc[static_cast<std::size_t>(pos)]);
        b.ids.push_back(data.id_labels[static_cast<std::size_t>(pos)]);
        b.apps.push_back(data.app_labels[static_cast<std::size_t>(pos)]);
    }
    return b;
}

std::string fmt(double v) {
    std::ostringstream o;
    o.precision(12);
    o << v;
    return o.str();
}

void log_step(std::ostream* log, std::int64_t step, int epoch, const char* id_main,
              const char* id_attn, const char* ccl, double total, float lr) {
    if (!log) return;
    (*log) << step << "\t" << epoch << "\t" << id_main << "\t" << id_attn << "\t" << ccl << "\t"
           << fmt(total) << "\t" << fmt(lr) << "\n";
}

[[noreturn]] void abort_nonfinite(std::int64_t step, int epoch, double id_main, double id_attn,
                                  double ccl, const std::vector<int>& positions) {
    std::ostringstream msg;
    msg << "training aborted: non-finite loss at step " << step << " (epoch " << epoch
        << "): id_main=" << id_main << " id_attn=" << id_attn << " ccl=" << ccl << " batch=[";
    for (std::size_t i = 0; i < positions.size(); ++i) msg << (i ? "," : "") << positions[i];
    msg << "]";
    throw std::runtime_error(msg.str());
}

} // namespace

float phase2_lr(const TrainConfig& config, int epoch) {
    float lr = config.lr;
    if (config.phase2_epochs > 0) {
        if (epoch >= config.phase2_epochs * 8 / 10)
            lr *= 0.01f;
        else if (epoch >= config.phase2_epochs * 6 / 10)
            lr *= 0.1f;
    }
    return lr;
}

void train_phase1(TrainState& state, const TrainConfig& config, const PreparedData& data,
                  std::ostream* metrics_log, int max_new_epochs) {
    if (state.phase != 1)
        throw std::logic_error("train_phase1: state has already moved to phase 2");
    DualStreamModel& model = *state.model;
    if (!model.attention_stream()) {
        state.epoch_in_phase = config.phase1_epochs;
        return;
    }
    auto params = model.attention_params();

    const int last1 = max_new_epochs < 0 ? config.phase1_epochs
                                         : std::min(config.phase1_epochs,
                                                    state.epoch_in_phase + max_new_epochs);
    for (int epoch = state.epoch_in_phase; epoch < last1; ++epoch) {
        BatchSampler sampler(*data.index, config.sampler);
        sampler.set_rng_state(state.sampler_rng_state);
        Rng aug;
        aug.state = state.aug_rng_state;
        const auto plan = sampler.epoch_plan();
        for (const auto& positions : plan) {
            Batch b = assemble_batch(data, positions, config.flip_augment, aug, true, false);
            Tensor fa = model.attention_stream()->forward(b.masked, true);
            auto head = model.attention_head()->forward(fa, true);
            Tensor dlogits;
            const double loss = id_loss(head.logits, b.ids, &dlogits);
            if (!std::isfinite(loss))
                abort_nonfinite(state.global_step, epoch, 0.0, loss, 0.0, b.positions);
            model.attention_stream()->backward(
                model.attention_head()->backward(Tensor(), dlogits));
            state.opt.step(params, config.lr, config.weight_decay);
            ++state.global_step;
            log_step(metrics_log, state.global_step, epoch, "-", fmt(loss).c_str(), "-", loss,
                     config.lr);
        }
        state.sampler_rng_state = sampler.rng_state();
        state.aug_rng_state = aug.state;
        state.epoch_in_phase = epoch + 1;
    }
}

void train_phase2(TrainState& state, const TrainConfig& config, const PreparedData& data,
                  std::ostream* metrics_log, int max_new_epochs) {
    DualStreamModel& model = *state.model;
    if (state.phase == 1) {
        state.phase = 2;
        state.epoch_in_phase = 0;
        state.opt.reset();
    }
    model.set_attention_frozen(config.freeze_attention);
    auto params = model.trainable_params();

    const bool has_attn = model.attention_stream() != nullptr;
    const bool has_cbd = model.cbd() != nullptr;
    const LossConfig loss_cfg = effective_loss_config(model.config().variant, config.loss);
    const bool use_ccl = has_cbd && loss_cfg.lambda > 0.0f;

    const int last2 = max_new_epochs < 0 ? config.phase2_epochs
                                         : std::min(config.phase2_epochs,
                                                    state.epoch_in_phase + max_new_epochs);
    for (int epoch = state.epoch_in_phase; epoch < last2; ++epoch) {
        const float lr = phase2_lr(config, epoch);
        BatchSampler sampler(*data.index, config.sampler);
        sampler.set_rng_state(state.sampler_rng_state);
        Rng aug;
        aug.state = state.aug_rng_state;
        const auto plan = sampler.epoch_plan();
        for (const auto& positions : plan) {
            Batch b = assemble_batch(data, positions, config.flip_augment, aug, has_attn, has_cbd);
            auto out = model.forward(b.images, b.masked, b.wc, true);

            Tensor dlogits_main, dlogits_attn, dfc;
            const double lm = id_loss(out.logits_main, b.ids, &dlogits_main);
            double la = 0.0;
            if (has_attn && !config.freeze_attention)
                la = id_loss(out.logits_attn, b.ids, &dlogits_attn);
            double ccl = 0.0;
            if (use_ccl) {
                BatchLabels labels{b.ids, b.apps};
                ccl = clothing_contrastive_loss(out.f_c, labels, loss_cfg, &dfc);
                for (float& g : dfc.v) g *= loss_cfg.lambda;
            }
            const double total = total_loss(lm, la, ccl, loss_cfg);
            if (!std::isfinite(total))
                abort_nonfinite(state.global_step, epoch, lm, la, ccl, b.positions);

            model.backward(dlogits_main, dlogits_attn, dfc);
            state.opt.step(params, lr, config.weight_decay);
            ++state.global_step;
            log_step(metrics_log, state.global_step, config.phase1_epochs + epoch,
                     fmt(lm).c_str(),
                     has_attn && !config.freeze_attention ? fmt(la).c_str() : "-",
                     use_ccl ? fmt(ccl).c_str() : "-", total, lr);
        }
        state.sampler_rng_state = sampler.rng_state();
        state.aug_rng_state = aug.state;
        state.epoch_in_phase = epoch + 1;
    }
}

std::unique_ptr<DualStreamModel> build_variant(const std::string& name,
                                               const BackboneConfig& backbone,
                                               int num_identities, std::uint64_t seed) {
    ModelConfig mc;
    mc.backbone = backbone;
    mc.num_identities = num_identities;
    mc.variant = parse_variant(name);
    mc.init_seed = seed;
    return std::make_unique<DualStreamModel>(mc);
}

LossConfig effective_loss_config(Variant variant, LossConfig base) {
    if (variant == Variant::IFDCL) base.T = 1.0f;  // plain supervised contrastive weighting
    return base;
}

void save_train_state(const std::string& path, TrainState& state) {
    CheckpointData ckpt;
    const ModelConfig& mc = state.model->config();
    ckpt.header["format"] = "ifd-checkpoint";
    ckpt.header["variant"] = variant_name(mc.variant);
    ckpt.header["num_identities"] = mc.num_identities;
    ckpt.header["init_seed"] = mc.init_seed;
    ckpt.header["backbone"] = {{"arch", mc.backbone.arch},
                               {"widths", mc.backbone.widths},
                               {"output_stride", mc.backbone.output_stride},
                               {"ikt_kernel", mc.backbone.ikt_kernel}};
    ckpt.header["phase"] = state.phase;
    ckpt.header["epoch_in_phase"] = state.epoch_in_phase;
    ckpt.header["global_step"] = state.global_step;
    ckpt.header["sampler_rng"] = state.sampler_rng_state;
    ckpt.header["aug_rng"] = state.aug_rng_state;
    ckpt.header["adam_t"] = state.opt.steps();

    for (const ArrayRef& a : state.model->all_arrays()) ckpt.entries.emplace_back(a.name, *a.value);
    for (const auto& [name, t] : state.opt.moments_m()) ckpt.entries.emplace_back("opt.m." + name, t);
    for (const auto& [name, t] : state.opt.moments_v()) ckpt.entries.emplace_back("opt.v." + name, t);
    save_checkpoint(path, ckpt);
}

TrainState load_train_state(const std::string& path) {
    const CheckpointData ckpt = load_checkpoint(path);
    const auto& h = ckpt.header;
    if (h.value("format", "") != "ifd-checkpoint")
        throw std::runtime_error("load error: " + path + " is not a training checkpoint");

    ModelConfig mc;
    mc.variant = parse_variant(h.at("variant").get<std::string>());
    mc.num_identities = h.at("num_identities").get<int>();
    mc.init_seed = h.at("init_seed").get<std::uint64_t>();
    mc.backbone.arch = h.at("backbone").at("arch").get<std::string>();
    mc.backbone.widths = h.at("backbone").at("widths").get<std::vector<int>>();
    mc.backbone.output_stride = h.at("backbone").at("output_stride").get<int>();
    mc.backbone.ikt_kernel = h.at("backbone").at("ikt_kernel").get<int>();

    TrainState state;
    state.model = std::make_unique<DualStreamModel>(mc);
    state.phase = h.at("phase").get<int>();
    state.epoch_in_phase = h.at("epoch_in_phase").get<int>();
    state.global_step = h.at("global_step").get<std::int64_t>();
    state.sampler_rng_state = h.at("sampler_rng").get<std::uint64_t>();
    state.aug_rng_state = h.at("aug_rng").get<std::uint64_t>();
    state.opt.set_steps(h.at("adam_t").get<std::int64_t>());

    for (const ArrayRef& a : state.model->all_arrays()) {
        const Tensor* stored = ckpt.find(a.name);
        if (!stored)
            throw std::runtime_error("load error: checkpoint " + path + " lacks parameter " +
                                     a.name);
        if (stored->shape != a.value->shape) {
            Tensor want(a.value->shape);
            throw std::runtime_error("load error: checkpoint " + path + ": parameter " + a.name +
                                     " has shape " + stored->shape_str() + ", model expects " +
                                     want.shape_str());
        }
        *a.value = *stored;
    }
    for (const auto& [name, t] : ckpt.entries) {
        if (name.rfind("opt.m.", 0) == 0) state.opt.moments_m()[name.substr(6)] = t;
        if (name.rfind("opt.v.", 0) == 0) state.opt.moments_v()[name.substr(6)] = t;
    }
    return state;
}

double attention_accuracy(TrainState& state, const PreparedData& data) {
    DualStreamModel& model = *state.model;
    if (!model.attention_stream()) return 0.0;
    int correct = 0;
    const int batch = 16;
    Rng dummy;
    for (std::size_t start = 0; start < data.images.size(); start += batch) {
        std::vector<int> positions;
        for (std::size_t i = start; i < std::min(data.images.size(), start + batch); ++i)
            positions.push_back(static_cast<int>(i));
        Batch b = assemble_batch(data, positions, false, dummy, true, false);
        Tensor fa = model.attention_stream()->forward(b.masked, false);
        auto head = model.attention_head()->forward(fa, false);
        for (int i = 0; i < static_cast<int>(positions.size()); ++i) {
            int best = 0;
            for (int j = 1; j < head.logits.dim(1); ++j)
                if (head.logits(i, j) > head.logits(i, best)) best = j;
            if (best == b.ids[static_cast<std::size_t>(i)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

std::uint64_t param_hash(const std::vector<ParamRef>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const ParamRef& p : params)
        for (float f : p.value->v) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, sizeof(bits));
            for (int b = 0; b < 4; ++b) {
                h ^= (bits >> (8 * b)) & 0xFF;
                h *= 0x100000001b3ull;
            }
        }
    return h;
}

} // namespace ifd
