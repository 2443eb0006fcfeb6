#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ifd/config.hpp"
#include "ifd/datamodel.hpp"
#include "ifd/losses.hpp"
#include "ifd/network.hpp"
#include "ifd/sampler.hpp"

namespace ifd {

struct TrainConfig {
    int phase1_epochs = 30;
    int phase2_epochs = 60;
    float lr = 3.5e-4f;
    float weight_decay = 0.0f;
    std::uint64_t seed = 0;
    bool freeze_attention = false;
    bool flip_augment = true;
    LossConfig loss;
    SamplerConfig sampler;
    BackboneConfig backbone;

    static TrainConfig from(const Config& config);
    void validate() const;
};

// Adam with decoupled weight decay. Moments are keyed by parameter path so
// they serialize next to the parameters.
class Adam {
public:
    void step(const std::vector<ParamRef>& params, float lr, float weight_decay);
    void reset() {
        t_ = 0;
        m_.clear();
        v_.clear();
    }

    std::int64_t steps() const { return t_; }
    void set_steps(std::int64_t t) { t_ = t; }
    std::map<std::string, Tensor>& moments_m() { return m_; }
    std::map<std::string, Tensor>& moments_v() { return v_; }

    float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;

private:
    std::int64_t t_ = 0;
    std::map<std::string, Tensor> m_, v_;
};

// Training tensors precomputed once per dataset: masked images, clothing
// masks at feature resolution, and contiguous label ids.
struct PreparedData {
    const DatasetIndex* index = nullptr;
    std::vector<Tensor> images;   // {3,H,W} per sample
    std::vector<Tensor> masked;   // {3,H,W}
    std::vector<Tensor> wc;       // {1,h,w}
    std::vector<int> id_labels;   // remapped to 0..K-1
    std::vector<int> app_labels;  // remapped appearance ids
    std::map<int, int> id_remap;
    int num_identities = 0;
    int feat_h = 0, feat_w = 0;
};

PreparedData prepare_training_data(const DatasetIndex& index, const RegionVocabulary& vocab,
                                   int feature_stride);

struct TrainState {
    std::unique_ptr<DualStreamModel> model;
    Adam opt;
    int phase = 1;           // 1 or 2
    int epoch_in_phase = 0;  // completed epochs of the current phase
    std::int64_t global_step = 0;
    std::uint64_t sampler_rng_state = 0;
    std::uint64_t aug_rng_state = 0;
};

TrainState init_train_state(const TrainConfig& config, Variant variant, int num_identities);

// Phase 1: attention stream + its head under identity cross-entropy on the
// masked images. No-op for variants without an attention stream; the main
// stream is never touched. Runs until phase1_epochs completed epochs.
void train_phase1(TrainState& state, const TrainConfig& config, const PreparedData& data,
                  std::ostream* metrics_log, int max_new_epochs = -1);

// Phase 2: joint training under L_ID^m + L_ID^a + lambda * L_CCL (terms that
// exist for the variant). Runs until phase2_epochs completed epochs.
// Transitions the state into phase 2 (fresh optimizer) on first call.
void train_phase2(TrainState& state, const TrainConfig& config, const PreparedData& data,
                  std::ostream* metrics_log, int max_new_epochs = -1);

// Table-style model assembly by ablation name:
//   baseline | ikt | cbd | ifd-cl | ifd
// ifd-cl differs from ifd only in the loss weighting (w_p forced to 1, i.e.
// T = 1); effective_loss_config applies that adjustment.
std::unique_ptr<DualStreamModel> build_variant(const std::string& name,
                                               const BackboneConfig& backbone,
                                               int num_identities, std::uint64_t seed);
LossConfig effective_loss_config(Variant variant, LossConfig base);

// Learning rate at a phase-2 epoch: steps down by 10x at 60% and 80%.
float phase2_lr(const TrainConfig& config, int epoch);

// Checkpoints carry the model arrays plus optimizer moments, counters and
// RNG streams, so training resumes bit-identically from an epoch boundary.
void save_train_state(const std::string& path, TrainState& state);
TrainState load_train_state(const std::string& path);

// Fraction of samples whose attention-head argmax matches the identity.
double attention_accuracy(TrainState& state, const PreparedData& data);

// FNV-1a over a parameter group; used to verify phase isolation.
std::uint64_t param_hash(const std::vector<ParamRef>& params);

} // namespace ifd
