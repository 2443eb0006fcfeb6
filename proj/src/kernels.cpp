#include "ifd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace ifd::kernels {

namespace {
Mode initial_mode() {
    const char* env = std::getenv("IFD_SERIAL");
    if (env && std::strcmp(env, "0") != 0) return Mode::Serial;
    return Mode::Parallel;
}
std::atomic<Mode> g_mode{initial_mode()};
} // namespace

Mode mode() { return g_mode.load(std::memory_order_relaxed); }
void set_mode(Mode m) { g_mode.store(m, std::memory_order_relaxed); }

#define IFD_DISPATCH(fn, ...)                              \
    do {                                                   \
        if (mode() == Mode::Serial)                        \
            serial::fn(__VA_ARGS__);                       \
        else                                               \
            par::fn(__VA_ARGS__);                          \
    } while (0)

void conv2d_forward(const float* x, const float* wt, const float* bias, float* y,
                    const ConvDims& d) {
    IFD_DISPATCH(conv2d_forward, x, wt, bias, y, d);
}
void conv2d_backward_input(const float* dy, const float* wt, float* dx, const ConvDims& d) {
    IFD_DISPATCH(conv2d_backward_input, dy, wt, dx, d);
}
void conv2d_backward_params(const float* x, const float* dy, float* dwt, float* db,
                            const ConvDims& d) {
    IFD_DISPATCH(conv2d_backward_params, x, dy, dwt, db, d);
}
void bn2d_forward_train(const float* x, const float* gamma, const float* beta, float* y,
                        float* save_mean, float* save_invstd, float* running_mean,
                        float* running_var, float eps, float momentum, int n, int c, int h,
                        int w) {
    IFD_DISPATCH(bn2d_forward_train, x, gamma, beta, y, save_mean, save_invstd,
                 running_mean, running_var, eps, momentum, n, c, h, w);
}
void bn2d_forward_eval(const float* x, const float* gamma, const float* beta,
                       const float* running_mean, const float* running_var, float* y,
                       float eps, int n, int c, int h, int w) {
    IFD_DISPATCH(bn2d_forward_eval, x, gamma, beta, running_mean, running_var, y, eps, n,
                 c, h, w);
}
void bn2d_backward(const float* x, const float* dy, const float* gamma,
                   const float* save_mean, const float* save_invstd, float* dx,
                   float* dgamma, float* dbeta, int n, int c, int h, int w) {
    IFD_DISPATCH(bn2d_backward, x, dy, gamma, save_mean, save_invstd, dx, dgamma, dbeta, n,
                 c, h, w);
}
void relu_forward(const float* x, float* y, std::size_t count) {
    IFD_DISPATCH(relu_forward, x, y, count);
}
void relu_backward(const float* x, const float* dy, float* dx, std::size_t count) {
    IFD_DISPATCH(relu_backward, x, dy, dx, count);
}
void maxpool2d_forward(const float* x, float* y, std::int32_t* argmax, int n, int c, int h,
                       int w, int k, int stride, int pad, int ho, int wo) {
    IFD_DISPATCH(maxpool2d_forward, x, y, argmax, n, c, h, w, k, stride, pad, ho, wo);
}
void maxpool2d_backward(const float* dy, const std::int32_t* argmax, float* dx, int n,
                        int c, int h, int w, int ho, int wo) {
    IFD_DISPATCH(maxpool2d_backward, dy, argmax, dx, n, c, h, w, ho, wo);
}
void gap_forward(const float* x, float* y, int n, int c, int h, int w) {
    IFD_DISPATCH(gap_forward, x, y, n, c, h, w);
}
void gap_backward(const float* dy, float* dx, int n, int c, int h, int w) {
    IFD_DISPATCH(gap_backward, dy, dx, n, c, h, w);
}
void linear_forward(const float* x, const float* wt, const float* bias, float* y, int n,
                    int in, int out) {
    IFD_DISPATCH(linear_forward, x, wt, bias, y, n, in, out);
}
void linear_backward_input(const float* dy, const float* wt, float* dx, int n, int in,
                           int out) {
    IFD_DISPATCH(linear_backward_input, dy, wt, dx, n, in, out);
}
void linear_backward_params(const float* x, const float* dy, float* dwt, float* db, int n,
                            int in, int out) {
    IFD_DISPATCH(linear_backward_params, x, dy, dwt, db, n, in, out);
}
void channel_maxmean_forward(const float* x, float* y, std::int32_t* argmax, int n, int c,
                             int h, int w) {
    IFD_DISPATCH(channel_maxmean_forward, x, y, argmax, n, c, h, w);
}
void channel_maxmean_backward(const float* dy, const std::int32_t* argmax, float* dx,
                              int n, int c, int h, int w) {
    IFD_DISPATCH(channel_maxmean_backward, dy, argmax, dx, n, c, h, w);
}
void broadcast_mul_forward(const float* a, const float* x, float* y, int n, int c, int h,
                           int w) {
    IFD_DISPATCH(broadcast_mul_forward, a, x, y, n, c, h, w);
}
void broadcast_mul_backward(const float* a, const float* x, const float* dy, float* da,
                            float* dx, int n, int c, int h, int w) {
    IFD_DISPATCH(broadcast_mul_backward, a, x, dy, da, dx, n, c, h, w);
}
void sigmoid_forward(const float* x, float* y, std::size_t count) {
    IFD_DISPATCH(sigmoid_forward, x, y, count);
}
void sigmoid_backward(const float* y, const float* dy, float* dx, std::size_t count) {
    IFD_DISPATCH(sigmoid_backward, y, dy, dx, count);
}
void add_forward(const float* a, const float* b, float* y, std::size_t count) {
    IFD_DISPATCH(add_forward, a, b, y, count);
}
void distance_matrix(const float* q, const float* g, float* d, int nq, int ng, int c) {
    IFD_DISPATCH(distance_matrix, q, g, d, nq, ng, c);
}

#undef IFD_DISPATCH

} // namespace ifd::kernels
