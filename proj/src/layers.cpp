#include "ifd/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace ifd {

namespace k = kernels;

Conv2d::Conv2d(int in_ch, int out_ch, int k_, int stride_, int pad_, bool bias_, Rng& rng)
    : weight({out_ch, in_ch, k_, k_}),
      bias(bias_ ? Tensor({out_ch}) : Tensor()),
      dweight({out_ch, in_ch, k_, k_}),
      dbias(bias_ ? Tensor({out_ch}) : Tensor()),
      in_ch(in_ch),
      out_ch(out_ch),
      k(k_),
      stride(stride_),
      pad(pad_),
      has_bias(bias_) {
    const float std = std::sqrt(2.0f / (static_cast<float>(in_ch) * k_ * k_));
    for (float& w : weight.v) w = rng.normal() * std;
}

Tensor Conv2d::forward(const Tensor& x, bool) {
    if (x.rank() != 4 || x.dim(1) != in_ch)
        throw std::invalid_argument("conv2d: expected {N," + std::to_string(in_ch) +
                                    ",H,W} input, got " + x.shape_str());
    if (x.dim(2) + 2 * pad < k || x.dim(3) + 2 * pad < k)
        throw std::invalid_argument("conv2d: input " + x.shape_str() +
                                    " is smaller than the receptive field");
    cached_x = x;
    k::ConvDims d{x.dim(0), in_ch, x.dim(2), x.dim(3), out_ch, k, stride, pad,
                  k::conv_out(x.dim(2), k, stride, pad), k::conv_out(x.dim(3), k, stride, pad)};
    Tensor y({d.n, d.co, d.ho, d.wo});
    k::conv2d_forward(x.data(), weight.data(), has_bias ? bias.data() : nullptr, y.data(), d);
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const Tensor& x = cached_x;
    k::ConvDims d{x.dim(0), in_ch, x.dim(2), x.dim(3), out_ch, k, stride, pad, dy.dim(2), dy.dim(3)};
    Tensor dx(x.shape);
    k::conv2d_backward_params(x.data(), dy.data(), dweight.data(),
                              has_bias ? dbias.data() : nullptr, d);
    k::conv2d_backward_input(dy.data(), weight.data(), dx.data(), d);
    return dx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>* params,
                     std::vector<ArrayRef>* arrays) {
    if (params) {
        params->push_back({join_path(prefix, "weight"), &weight, &dweight});
        if (has_bias) params->push_back({join_path(prefix, "bias"), &bias, &dbias});
    }
    if (arrays) {
        arrays->push_back({join_path(prefix, "weight"), &weight});
        if (has_bias) arrays->push_back({join_path(prefix, "bias"), &bias});
    }
}

BatchNorm2d::BatchNorm2d(int channels_, float eps_, float momentum_)
    : gamma(Tensor::full({channels_}, 1.0f)),
      beta({channels_}),
      running_mean({channels_}),
      running_var(Tensor::full({channels_}, 1.0f)),
      dgamma({channels_}),
      dbeta({channels_}),
      eps(eps_),
      momentum(momentum_),
      channels(channels_),
      save_mean({channels_}),
      save_invstd({channels_}) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    if (x.rank() != 4 || x.dim(1) != channels)
        throw std::invalid_argument("batchnorm2d: expected {N," + std::to_string(channels) +
                                    ",H,W} input, got " + x.shape_str());
    Tensor y(x.shape);
    cached_train = train;
    if (train) {
        cached_x = x;
        k::bn2d_forward_train(x.data(), gamma.data(), beta.data(), y.data(), save_mean.data(),
                              save_invstd.data(), running_mean.data(), running_var.data(), eps,
                              momentum, x.dim(0), channels, x.dim(2), x.dim(3));
    } else {
        k::bn2d_forward_eval(x.data(), gamma.data(), beta.data(), running_mean.data(),
                             running_var.data(), y.data(), eps, x.dim(0), channels, x.dim(2),
                             x.dim(3));
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    if (!cached_train)
        throw std::logic_error("batchnorm2d: backward called after an eval-mode forward");
    Tensor dx(cached_x.shape);
    k::bn2d_backward(cached_x.data(), dy.data(), gamma.data(), save_mean.data(),
                     save_invstd.data(), dx.data(), dgamma.data(), dbeta.data(), cached_x.dim(0),
                     channels, cached_x.dim(2), cached_x.dim(3));
    return dx;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>* params,
                          std::vector<ArrayRef>* arrays) {
    if (params) {
        params->push_back({join_path(prefix, "gamma"), &gamma, &dgamma});
        params->push_back({join_path(prefix, "beta"), &beta, &dbeta});
    }
    if (arrays) {
        arrays->push_back({join_path(prefix, "gamma"), &gamma});
        arrays->push_back({join_path(prefix, "beta"), &beta});
        arrays->push_back({join_path(prefix, "running_mean"), &running_mean});
        arrays->push_back({join_path(prefix, "running_var"), &running_var});
    }
}

Tensor ReLU::forward(const Tensor& x, bool) {
    cached_x = x;
    Tensor y(x.shape);
    k::relu_forward(x.data(), y.data(), x.numel());
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx(cached_x.shape);
    k::relu_backward(cached_x.data(), dy.data(), dx.data(), dx.numel());
    return dx;
}

Tensor MaxPool2d::forward(const Tensor& x, bool) {
    in_shape = x.shape;
    ho = k::conv_out(x.dim(2), k, stride, pad);
    wo = k::conv_out(x.dim(3), k, stride, pad);
    Tensor y({x.dim(0), x.dim(1), ho, wo});
    argmax.assign(y.numel(), -1);
    k::maxpool2d_forward(x.data(), y.data(), argmax.data(), x.dim(0), x.dim(1), x.dim(2),
                         x.dim(3), k, stride, pad, ho, wo);
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
    Tensor dx(in_shape);
    k::maxpool2d_backward(dy.data(), argmax.data(), dx.data(), in_shape[0], in_shape[1],
                          in_shape[2], in_shape[3], ho, wo);
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    in_shape = x.shape;
    Tensor y({x.dim(0), x.dim(1)});
    k::gap_forward(x.data(), y.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx(in_shape);
    k::gap_backward(dy.data(), dx.data(), in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    return dx;
}

Linear::Linear(int in_dim_, int out_dim_, Rng& rng, float init_std)
    : weight({out_dim_, in_dim_}),
      bias({out_dim_}),
      dweight({out_dim_, in_dim_}),
      dbias({out_dim_}),
      in_dim(in_dim_),
      out_dim(out_dim_) {
    for (float& w : weight.v) w = rng.normal() * init_std;
}

Tensor Linear::forward(const Tensor& x, bool) {
    if (x.rank() != 2 || x.dim(1) != in_dim)
        throw std::invalid_argument("linear: expected {N," + std::to_string(in_dim) +
                                    "} input, got " + x.shape_str());
    cached_x = x;
    Tensor y({x.dim(0), out_dim});
    k::linear_forward(x.data(), weight.data(), bias.data(), y.data(), x.dim(0), in_dim, out_dim);
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    Tensor dx(cached_x.shape);
    k::linear_backward_params(cached_x.data(), dy.data(), dweight.data(), dbias.data(),
                              cached_x.dim(0), in_dim, out_dim);
    k::linear_backward_input(dy.data(), weight.data(), dx.data(), cached_x.dim(0), in_dim,
                             out_dim);
    return dx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>* params,
                     std::vector<ArrayRef>* arrays) {
    if (params) {
        params->push_back({join_path(prefix, "weight"), &weight, &dweight});
        params->push_back({join_path(prefix, "bias"), &bias, &dbias});
    }
    if (arrays) {
        arrays->push_back({join_path(prefix, "weight"), &weight});
        arrays->push_back({join_path(prefix, "bias"), &bias});
    }
}

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor cur = x;
    for (auto& layer : layers_) cur = layer->forward(cur, train);
    return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

void Sequential::collect(const std::string& prefix, std::vector<ParamRef>* params,
                         std::vector<ArrayRef>* arrays) {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect(join_path(prefix, names_[i]), params, arrays);
}

Bottleneck::Bottleneck(int in_ch, int mid_ch, int out_ch, int stride, Rng& rng)
    : conv1_(in_ch, mid_ch, 1, 1, 0, false, rng),
      conv2_(mid_ch, mid_ch, 3, stride, 1, false, rng),
      conv3_(mid_ch, out_ch, 1, 1, 0, false, rng),
      bn1_(mid_ch),
      bn2_(mid_ch),
      bn3_(out_ch) {
    if (stride != 1 || in_ch != out_ch) {
        down_conv_ = std::make_unique<Conv2d>(in_ch, out_ch, 1, stride, 0, false, rng);
        down_bn_ = std::make_unique<BatchNorm2d>(out_ch);
    }
}

Tensor Bottleneck::forward(const Tensor& x, bool train) {
    cached_x = x;
    Tensor y = relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train);
    y = relu2_.forward(bn2_.forward(conv2_.forward(y, train), train), train);
    y = bn3_.forward(conv3_.forward(y, train), train);
    Tensor shortcut =
        down_conv_ ? down_bn_->forward(down_conv_->forward(x, train), train) : x;
    Tensor sum(y.shape);
    k::add_forward(y.data(), shortcut.data(), sum.data(), sum.numel());
    cached_sum = sum;
    Tensor out(sum.shape);
    k::relu_forward(sum.data(), out.data(), out.numel());
    return out;
}

Tensor Bottleneck::backward(const Tensor& dy) {
    Tensor dsum(cached_sum.shape);
    k::relu_backward(cached_sum.data(), dy.data(), dsum.data(), dsum.numel());
    Tensor dx_main = conv1_.backward(bn1_.backward(
        relu1_.backward(conv2_.backward(bn2_.backward(relu2_.backward(
            conv3_.backward(bn3_.backward(dsum))))))));
    Tensor dx_short = down_conv_ ? down_conv_->backward(down_bn_->backward(dsum)) : dsum;
    Tensor dx(cached_x.shape);
    k::add_forward(dx_main.data(), dx_short.data(), dx.data(), dx.numel());
    return dx;
}

void Bottleneck::collect(const std::string& prefix, std::vector<ParamRef>* params,
                         std::vector<ArrayRef>* arrays) {
    conv1_.collect(join_path(prefix, "conv1"), params, arrays);
    bn1_.collect(join_path(prefix, "bn1"), params, arrays);
    conv2_.collect(join_path(prefix, "conv2"), params, arrays);
    bn2_.collect(join_path(prefix, "bn2"), params, arrays);
    conv3_.collect(join_path(prefix, "conv3"), params, arrays);
    bn3_.collect(join_path(prefix, "bn3"), params, arrays);
    if (down_conv_) {
        down_conv_->collect(join_path(prefix, "down_conv"), params, arrays);
        down_bn_->collect(join_path(prefix, "down_bn"), params, arrays);
    }
}

} // namespace ifd
