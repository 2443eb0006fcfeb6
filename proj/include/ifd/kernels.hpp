#pragma once

#include <cstddef>
#include <cstdint>

// Compute kernels behind the network layers. Every kernel exists twice:
// kernels::serial holds the plain-loop reference used by the tests, and
// kernels::par holds the OpenMP version used by default. Both assign each
// output element to exactly one iteration, so results are independent of
// thread count. The unqualified functions dispatch on the global mode.
namespace ifd::kernels {

enum class Mode { Serial, Parallel };

Mode mode();
void set_mode(Mode m);

struct ConvDims {
    int n, ci, h, w;   // input
    int co, k;         // filters (square kernel)
    int stride, pad;
    int ho, wo;        // output
};

inline int conv_out(int size, int k, int stride, int pad) {
    return (size + 2 * pad - k) / stride + 1;
}

#define IFD_KERNEL_DECLS                                                                 \
    void conv2d_forward(const float* x, const float* wt, const float* bias, float* y,   \
                        const ConvDims& d);                                              \
    void conv2d_backward_input(const float* dy, const float* wt, float* dx,              \
                               const ConvDims& d);                                       \
    void conv2d_backward_params(const float* x, const float* dy, float* dwt, float* db,  \
                                const ConvDims& d);                                      \
    void bn2d_forward_train(const float* x, const float* gamma, const float* beta,       \
                            float* y, float* save_mean, float* save_invstd,              \
                            float* running_mean, float* running_var, float eps,          \
                            float momentum, int n, int c, int h, int w);                 \
    void bn2d_forward_eval(const float* x, const float* gamma, const float* beta,        \
                           const float* running_mean, const float* running_var,          \
                           float* y, float eps, int n, int c, int h, int w);             \
    void bn2d_backward(const float* x, const float* dy, const float* gamma,              \
                       const float* save_mean, const float* save_invstd, float* dx,      \
                       float* dgamma, float* dbeta, int n, int c, int h, int w);         \
    void relu_forward(const float* x, float* y, std::size_t count);                      \
    void relu_backward(const float* x, const float* dy, float* dx, std::size_t count);   \
    void maxpool2d_forward(const float* x, float* y, std::int32_t* argmax, int n, int c, \
                           int h, int w, int k, int stride, int pad, int ho, int wo);    \
    void maxpool2d_backward(const float* dy, const std::int32_t* argmax, float* dx,      \
                            int n, int c, int h, int w, int ho, int wo);                 \
    void gap_forward(const float* x, float* y, int n, int c, int h, int w);              \
    void gap_backward(const float* dy, float* dx, int n, int c, int h, int w);           \
    void linear_forward(const float* x, const float* wt, const float* bias, float* y,    \
                        int n, int in, int out);                                         \
    void linear_backward_input(const float* dy, const float* wt, float* dx, int n,       \
                               int in, int out);                                         \
    void linear_backward_params(const float* x, const float* dy, float* dwt, float* db,  \
                                int n, int in, int out);                                 \
    void channel_maxmean_forward(const float* x, float* y, std::int32_t* argmax, int n,  \
                                 int c, int h, int w);                                   \
    void channel_maxmean_backward(const float* dy, const std::int32_t* argmax,           \
                                  float* dx, int n, int c, int h, int w);                \
    void broadcast_mul_forward(const float* a, const float* x, float* y, int n, int c,   \
                               int h, int w);                                            \
    void broadcast_mul_backward(const float* a, const float* x, const float* dy,         \
                                float* da, float* dx, int n, int c, int h, int w);       \
    void sigmoid_forward(const float* x, float* y, std::size_t count);                   \
    void sigmoid_backward(const float* y, const float* dy, float* dx, std::size_t count);\
    void add_forward(const float* a, const float* b, float* y, std::size_t count);       \
    void distance_matrix(const float* q, const float* g, float* d, int nq, int ng,       \
                         int c);

namespace serial {
IFD_KERNEL_DECLS
}
namespace par {
IFD_KERNEL_DECLS
}
IFD_KERNEL_DECLS

#undef IFD_KERNEL_DECLS

} // namespace ifd::kernels
