#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ifd/kernels.hpp"
#include "ifd/rng.hpp"
#include "ifd/tensor.hpp"

namespace ifd {

// Trainable parameter reference (value + gradient slot).
struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

// Persistable array reference: trainable parameters plus buffers such as
// batch-norm running statistics. This is what checkpoints serialize.
struct ArrayRef {
    std::string name;
    Tensor* value;
};

// A differentiable block. forward() caches whatever backward() needs; one
// backward per forward. backward() overwrites parameter gradients.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual void collect(const std::string& prefix, std::vector<ParamRef>* params,
                         std::vector<ArrayRef>* arrays) = 0;
};

inline std::string join_path(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

class Conv2d final : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int k, int stride, int pad, bool bias, Rng& rng);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays) override;

    Tensor weight, bias;          // {co,ci,k,k}, {co}
    Tensor dweight, dbias;
    int in_ch, out_ch, k, stride, pad;
    bool has_bias;

private:
    Tensor cached_x;
};

class BatchNorm2d final : public Layer {
public:
    explicit BatchNorm2d(int channels, float eps = 1e-5f, float momentum = 0.1f);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays) override;

    Tensor gamma, beta, running_mean, running_var;
    Tensor dgamma, dbeta;
    float eps, momentum;
    int channels;

private:
    Tensor cached_x, save_mean, save_invstd;
    bool cached_train = false;
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string&, std::vector<ParamRef>*, std::vector<ArrayRef>*) override {}

private:
    Tensor cached_x;
};

class MaxPool2d final : public Layer {
public:
    MaxPool2d(int k, int stride, int pad) : k(k), stride(stride), pad(pad) {}

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string&, std::vector<ParamRef>*, std::vector<ArrayRef>*) override {}

    int k, stride, pad;

private:
    std::vector<std::int32_t> argmax;
    std::vector<int> in_shape;
    int ho = 0, wo = 0;
};

// {N,C,H,W} -> {N,C}
class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string&, std::vector<ParamRef>*, std::vector<ArrayRef>*) override {}

private:
    std::vector<int> in_shape;
};

class Linear final : public Layer {
public:
    Linear(int in_dim, int out_dim, Rng& rng, float init_std = 0.01f);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays) override;

    Tensor weight, bias;  // {out,in}, {out}
    Tensor dweight, dbias;
    int in_dim, out_dim;

private:
    Tensor cached_x;
};

class Sequential final : public Layer {
public:
    void add(const std::string& name, std::unique_ptr<Layer> layer) {
        names_.push_back(name);
        layers_.push_back(std::move(layer));
    }

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays) override;

    std::size_t size() const { return layers_.size(); }

private:
    std::vector<std::string> names_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

// ResNet bottleneck: 1x1 -> 3x3(stride) -> 1x1 with identity or projected
// shortcut, post-activation.
class Bottleneck final : public Layer {
public:
    Bottleneck(int in_ch, int mid_ch, int out_ch, int stride, Rng& rng);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect(const std::string& prefix, std::vector<ParamRef>* params,
                 std::vector<ArrayRef>* arrays) override;

private:
    Conv2d conv1_, conv2_, conv3_;
    BatchNorm2d bn1_, bn2_, bn3_;
    ReLU relu1_, relu2_;
    std::unique_ptr<Conv2d> down_conv_;
    std::unique_ptr<BatchNorm2d> down_bn_;
    Tensor cached_x, cached_sum;
};

} // namespace ifd
