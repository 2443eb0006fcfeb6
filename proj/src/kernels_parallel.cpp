#include "ifd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

// OpenMP kernels. Loop nests are rearranged so the innermost loop runs over
// contiguous memory; each output element is still written by exactly one
// iteration, so results do not depend on the thread count or schedule.
namespace ifd::kernels::par {

namespace {

// NCHW -> NHWC so the channel axis is contiguous for the inner loops.
std::vector<float> pack_nhwc(const float* x, int n, int c, int h, int w) {
    std::vector<float> out(static_cast<std::size_t>(n) * c * h * w);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float* src = x + (static_cast<std::size_t>(i) * c + ch) * h * w;
            float* dst = out.data() + static_cast<std::size_t>(i) * h * w * c + ch;
            for (int j = 0; j < h * w; ++j) dst[static_cast<std::size_t>(j) * c] = src[j];
        }
    return out;
}

} // namespace

void conv2d_forward(const float* x, const float* wt, const float* bias, float* y,
                    const ConvDims& d) {
    const std::vector<float> px = pack_nhwc(x, d.n, d.ci, d.h, d.w);
    // wt[co][ci][kh][kw] -> tw[kh][kw][ci][co]
    std::vector<float> tw(static_cast<std::size_t>(d.k) * d.k * d.ci * d.co);
    for (int co = 0; co < d.co; ++co)
        for (int ci = 0; ci < d.ci; ++ci)
            for (int kh = 0; kh < d.k; ++kh)
                for (int kw = 0; kw < d.k; ++kw)
                    tw[((static_cast<std::size_t>(kh) * d.k + kw) * d.ci + ci) * d.co + co] =
                        wt[((static_cast<std::size_t>(co) * d.ci + ci) * d.k + kh) * d.k + kw];

    std::vector<float> ynhwc(static_cast<std::size_t>(d.n) * d.ho * d.wo * d.co);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int ho = 0; ho < d.ho; ++ho)
            for (int wo = 0; wo < d.wo; ++wo) {
                float* yrow = ynhwc.data() +
                              ((static_cast<std::size_t>(n) * d.ho + ho) * d.wo + wo) * d.co;
                if (bias)
                    std::copy(bias, bias + d.co, yrow);
                else
                    std::fill(yrow, yrow + d.co, 0.0f);
                for (int kh = 0; kh < d.k; ++kh) {
                    const int hi = ho * d.stride - d.pad + kh;
                    if (hi < 0 || hi >= d.h) continue;
                    for (int kw = 0; kw < d.k; ++kw) {
                        const int wi = wo * d.stride - d.pad + kw;
                        if (wi < 0 || wi >= d.w) continue;
                        const float* xrow = px.data() +
                                            ((static_cast<std::size_t>(n) * d.h + hi) * d.w + wi) * d.ci;
                        const float* twrow =
                            tw.data() + (static_cast<std::size_t>(kh) * d.k + kw) * d.ci * d.co;
                        for (int ci = 0; ci < d.ci; ++ci) {
                            const float xs = xrow[ci];
                            const float* wr = twrow + static_cast<std::size_t>(ci) * d.co;
                            for (int co = 0; co < d.co; ++co) yrow[co] += xs * wr[co];
                        }
                    }
                }
            }
        // NHWC -> NCHW for this sample
        for (int co = 0; co < d.co; ++co) {
            float* dst = y + (static_cast<std::size_t>(n) * d.co + co) * d.ho * d.wo;
            const float* src = ynhwc.data() + static_cast<std::size_t>(n) * d.ho * d.wo * d.co + co;
            for (int j = 0; j < d.ho * d.wo; ++j) dst[j] = src[static_cast<std::size_t>(j) * d.co];
        }
    }
}

void conv2d_backward_input(const float* dy, const float* wt, float* dx, const ConvDims& d) {
    const std::vector<float> pdy = pack_nhwc(dy, d.n, d.co, d.ho, d.wo);
    // wt[co][ci][kh][kw] -> tw[kh][kw][co][ci]
    std::vector<float> tw(static_cast<std::size_t>(d.k) * d.k * d.co * d.ci);
    for (int co = 0; co < d.co; ++co)
        for (int ci = 0; ci < d.ci; ++ci)
            for (int kh = 0; kh < d.k; ++kh)
                for (int kw = 0; kw < d.k; ++kw)
                    tw[((static_cast<std::size_t>(kh) * d.k + kw) * d.co + co) * d.ci + ci] =
                        wt[((static_cast<std::size_t>(co) * d.ci + ci) * d.k + kh) * d.k + kw];

    std::vector<float> dxnhwc(static_cast<std::size_t>(d.n) * d.h * d.w * d.ci, 0.0f);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int ho = 0; ho < d.ho; ++ho)
            for (int wo = 0; wo < d.wo; ++wo) {
                const float* dyrow = pdy.data() +
                                     ((static_cast<std::size_t>(n) * d.ho + ho) * d.wo + wo) * d.co;
                for (int kh = 0; kh < d.k; ++kh) {
                    const int hi = ho * d.stride - d.pad + kh;
                    if (hi < 0 || hi >= d.h) continue;
                    for (int kw = 0; kw < d.k; ++kw) {
                        const int wi = wo * d.stride - d.pad + kw;
                        if (wi < 0 || wi >= d.w) continue;
                        float* dxrow = dxnhwc.data() +
                                       ((static_cast<std::size_t>(n) * d.h + hi) * d.w + wi) * d.ci;
                        const float* twrow =
                            tw.data() + (static_cast<std::size_t>(kh) * d.k + kw) * d.co * d.ci;
                        for (int co = 0; co < d.co; ++co) {
                            const float g = dyrow[co];
                            const float* wr = twrow + static_cast<std::size_t>(co) * d.ci;
                            for (int ci = 0; ci < d.ci; ++ci) dxrow[ci] += g * wr[ci];
                        }
                    }
                }
            }
        for (int ci = 0; ci < d.ci; ++ci) {
            float* dst = dx + (static_cast<std::size_t>(n) * d.ci + ci) * d.h * d.w;
            const float* src = dxnhwc.data() + static_cast<std::size_t>(n) * d.h * d.w * d.ci + ci;
            for (int j = 0; j < d.h * d.w; ++j) dst[j] = src[static_cast<std::size_t>(j) * d.ci];
        }
    }
}

void conv2d_backward_params(const float* x, const float* dy, float* dwt, float* db,
                            const ConvDims& d) {
    const std::vector<float> px = pack_nhwc(x, d.n, d.ci, d.h, d.w);
    const std::size_t out_plane = static_cast<std::size_t>(d.ho) * d.wo;
#pragma omp parallel for schedule(static)
    for (int co = 0; co < d.co; ++co) {
        std::vector<float> acc(static_cast<std::size_t>(d.k) * d.k * d.ci, 0.0f);
        double bacc = 0.0;
        for (int n = 0; n < d.n; ++n) {
            const float* dyp = dy + (static_cast<std::size_t>(n) * d.co + co) * out_plane;
            for (int ho = 0; ho < d.ho; ++ho)
                for (int wo = 0; wo < d.wo; ++wo) {
                    const float g = dyp[static_cast<std::size_t>(ho) * d.wo + wo];
                    bacc += g;
                    if (g == 0.0f) continue;
                    for (int kh = 0; kh < d.k; ++kh) {
                        const int hi = ho * d.stride - d.pad + kh;
                        if (hi < 0 || hi >= d.h) continue;
                        for (int kw = 0; kw < d.k; ++kw) {
                            const int wi = wo * d.stride - d.pad + kw;
                            if (wi < 0 || wi >= d.w) continue;
                            const float* xrow =
                                px.data() +
                                ((static_cast<std::size_t>(n) * d.h + hi) * d.w + wi) * d.ci;
                            float* arow =
                                acc.data() + (static_cast<std::size_t>(kh) * d.k + kw) * d.ci;
                            for (int ci = 0; ci < d.ci; ++ci) arow[ci] += g * xrow[ci];
                        }
                    }
                }
        }
        for (int ci = 0; ci < d.ci; ++ci)
            for (int kh = 0; kh < d.k; ++kh)
                for (int kw = 0; kw < d.k; ++kw)
                    dwt[((static_cast<std::size_t>(co) * d.ci + ci) * d.k + kh) * d.k + kw] =
                        acc[(static_cast<std::size_t>(kh) * d.k + kw) * d.ci + ci];
        if (db) db[co] = static_cast<float>(bacc);
    }
}

void bn2d_forward_train(const float* x, const float* gamma, const float* beta, float* y,
                        float* save_mean, float* save_invstd, float* running_mean,
                        float* running_var, float eps, float momentum, int n, int c, int h,
                        int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(n) * h * w;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* p = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                sum += p[j];
                sumsq += static_cast<double>(p[j]) * p[j];
            }
        }
        const double mean = sum / m;
        const double var = sumsq / m - mean * mean;
        const double invstd = 1.0 / std::sqrt(var + eps);
        save_mean[ch] = static_cast<float>(mean);
        save_invstd[ch] = static_cast<float>(invstd);
        if (running_mean) {
            const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
            running_mean[ch] = static_cast<float>((1.0 - momentum) * running_mean[ch] + momentum * mean);
            running_var[ch] = static_cast<float>((1.0 - momentum) * running_var[ch] + momentum * unbiased);
        }
        const float fm = static_cast<float>(mean), fs = static_cast<float>(invstd);
        for (int i = 0; i < n; ++i) {
            const float* p = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            float* q = y + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) q[j] = (p[j] - fm) * fs * gamma[ch] + beta[ch];
        }
    }
}

void bn2d_forward_eval(const float* x, const float* gamma, const float* beta,
                       const float* running_mean, const float* running_var, float* y,
                       float eps, int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const float invstd = 1.0f / std::sqrt(running_var[ch] + eps);
        for (int i = 0; i < n; ++i) {
            const float* p = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            float* q = y + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j)
                q[j] = (p[j] - running_mean[ch]) * invstd * gamma[ch] + beta[ch];
        }
    }
}

void bn2d_backward(const float* x, const float* dy, const float* gamma,
                   const float* save_mean, const float* save_invstd, float* dx,
                   float* dgamma, float* dbeta, int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(n) * h * w;
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < c; ++ch) {
        const double mean = save_mean[ch];
        const double invstd = save_invstd[ch];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < n; ++i) {
            const float* px = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            const float* pd = dy + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                sum_dy += pd[j];
                sum_dy_xhat += pd[j] * (px[j] - mean) * invstd;
            }
        }
        dgamma[ch] = static_cast<float>(sum_dy_xhat);
        dbeta[ch] = static_cast<float>(sum_dy);
        const double g = gamma[ch];
        for (int i = 0; i < n; ++i) {
            const float* px = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            const float* pd = dy + (static_cast<std::size_t>(i) * c + ch) * plane;
            float* pq = dx + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) {
                const double xhat = (px[j] - mean) * invstd;
                pq[j] = static_cast<float>(g * invstd * (pd[j] - sum_dy / m - xhat * sum_dy_xhat / m));
            }
        }
    }
}

void relu_forward(const float* x, float* y, std::size_t count) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i)
        y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* dy, float* dx, std::size_t count) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i)
        dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void maxpool2d_forward(const float* x, float* y, std::int32_t* argmax, int n, int c, int h,
                       int w, int k, int stride, int pad, int ho, int wo) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow) {
                    float best = -std::numeric_limits<float>::infinity();
                    std::int32_t best_idx = -1;
                    for (int kh = 0; kh < k; ++kh)
                        for (int kw = 0; kw < k; ++kw) {
                            int hi = oh * stride - pad + kh;
                            int wi = ow * stride - pad + kw;
                            if (hi < 0 || hi >= h || wi < 0 || wi >= w) continue;
                            float vv = x[((static_cast<std::size_t>(i) * c + ch) * h + hi) * w + wi];
                            if (vv > best) {
                                best = vv;
                                best_idx = hi * w + wi;
                            }
                        }
                    std::size_t o = ((static_cast<std::size_t>(i) * c + ch) * ho + oh) * wo + ow;
                    y[o] = best;
                    argmax[o] = best_idx;
                }
}

void maxpool2d_backward(const float* dy, const std::int32_t* argmax, float* dx, int n,
                        int c, int h, int w, int ho, int wo) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            float* p = dx + (static_cast<std::size_t>(i) * c + ch) * plane;
            std::fill(p, p + plane, 0.0f);
            for (int oh = 0; oh < ho; ++oh)
                for (int ow = 0; ow < wo; ++ow) {
                    std::size_t o = ((static_cast<std::size_t>(i) * c + ch) * ho + oh) * wo + ow;
                    if (argmax[o] >= 0) p[argmax[o]] += dy[o];
                }
        }
}

void gap_forward(const float* x, float* y, int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            const float* p = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) acc += p[j];
            y[static_cast<std::size_t>(i) * c + ch] = static_cast<float>(acc / static_cast<double>(plane));
        }
}

void gap_backward(const float* dy, float* dx, int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float g = dy[static_cast<std::size_t>(i) * c + ch] / static_cast<float>(plane);
            float* p = dx + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) p[j] = g;
        }
}

void linear_forward(const float* x, const float* wt, const float* bias, float* y, int n,
                    int in, int out) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (int o = 0; o < out; ++o) {
            float acc = bias ? bias[o] : 0.0f;
            const float* xp = x + static_cast<std::size_t>(i) * in;
            const float* wp = wt + static_cast<std::size_t>(o) * in;
            for (int j = 0; j < in; ++j) acc += xp[j] * wp[j];
            y[static_cast<std::size_t>(i) * out + o] = acc;
        }
}

void linear_backward_input(const float* dy, const float* wt, float* dx, int n, int in,
                           int out) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        float* dxp = dx + static_cast<std::size_t>(i) * in;
        std::fill(dxp, dxp + in, 0.0f);
        for (int o = 0; o < out; ++o) {
            const float g = dy[static_cast<std::size_t>(i) * out + o];
            const float* wp = wt + static_cast<std::size_t>(o) * in;
            for (int j = 0; j < in; ++j) dxp[j] += g * wp[j];
        }
    }
}

void linear_backward_params(const float* x, const float* dy, float* dwt, float* db, int n,
                            int in, int out) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out; ++o) {
        float* dwp = dwt + static_cast<std::size_t>(o) * in;
        std::fill(dwp, dwp + in, 0.0f);
        double bacc = 0.0;
        for (int i = 0; i < n; ++i) {
            const float g = dy[static_cast<std::size_t>(i) * out + o];
            const float* xp = x + static_cast<std::size_t>(i) * in;
            for (int j = 0; j < in; ++j) dwp[j] += g * xp[j];
            bacc += g;
        }
        if (db) db[o] = static_cast<float>(bacc);
    }
}

void channel_maxmean_forward(const float* x, float* y, std::int32_t* argmax, int n, int c,
                             int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < plane; ++j) {
            float best = x[(static_cast<std::size_t>(i) * c) * plane + j];
            std::int32_t best_c = 0;
            double sum = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                float vv = x[(static_cast<std::size_t>(i) * c + ch) * plane + j];
                sum += vv;
                if (vv > best) {
                    best = vv;
                    best_c = ch;
                }
            }
            y[(static_cast<std::size_t>(i) * 2 + 0) * plane + j] = best;
            y[(static_cast<std::size_t>(i) * 2 + 1) * plane + j] =
                static_cast<float>(sum / static_cast<double>(c));
            argmax[static_cast<std::size_t>(i) * plane + j] = best_c;
        }
}

void channel_maxmean_backward(const float* dy, const std::int32_t* argmax, float* dx,
                              int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < plane; ++j) {
            const float dmax = dy[(static_cast<std::size_t>(i) * 2 + 0) * plane + j];
            const float dmean = dy[(static_cast<std::size_t>(i) * 2 + 1) * plane + j] / static_cast<float>(c);
            for (int ch = 0; ch < c; ++ch) {
                float g = dmean;
                if (ch == argmax[static_cast<std::size_t>(i) * plane + j]) g += dmax;
                dx[(static_cast<std::size_t>(i) * c + ch) * plane + j] = g;
            }
        }
}

void broadcast_mul_forward(const float* a, const float* x, float* y, int n, int c, int h,
                           int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float* ap = a + static_cast<std::size_t>(i) * plane;
            const float* xp = x + (static_cast<std::size_t>(i) * c + ch) * plane;
            float* yp = y + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) yp[j] = ap[j] * xp[j];
        }
}

void broadcast_mul_backward(const float* a, const float* x, const float* dy, float* da,
                            float* dx, int n, int c, int h, int w) {
    const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < plane; ++j) {
            double acc = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t o = (static_cast<std::size_t>(i) * c + ch) * plane + j;
                acc += static_cast<double>(dy[o]) * x[o];
                if (dx) dx[o] = a[static_cast<std::size_t>(i) * plane + j] * dy[o];
            }
            if (da) da[static_cast<std::size_t>(i) * plane + j] = static_cast<float>(acc);
        }
}

void sigmoid_forward(const float* x, float* y, std::size_t count) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i)
        y[i] = 1.0f / (1.0f + std::exp(-x[i]));
}

void sigmoid_backward(const float* y, const float* dy, float* dx, std::size_t count) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i)
        dx[i] = dy[i] * y[i] * (1.0f - y[i]);
}

void add_forward(const float* a, const float* b, float* y, std::size_t count) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) y[i] = a[i] + b[i];
}

void distance_matrix(const float* q, const float* g, float* d, int nq, int ng, int c) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nq; ++i)
        for (int j = 0; j < ng; ++j) {
            double dot = 0.0;
            for (int k = 0; k < c; ++k)
                dot += static_cast<double>(q[static_cast<std::size_t>(i) * c + k]) *
                       g[static_cast<std::size_t>(j) * c + k];
            d[static_cast<std::size_t>(i) * ng + j] = static_cast<float>(1.0 - dot);
        }
}

} // namespace ifd::kernels::par
