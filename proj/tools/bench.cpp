// Timing comparison between the serial reference kernels and the OpenMP
// kernels on training-step-sized workloads.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ifd/kernels.hpp"
#include "ifd/rng.hpp"
#include "ifd/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace ifd;
namespace k = kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, const std::function<void()>& serial_fn,
            const std::function<void()>& par_fn, int reps) {
    const double s = time_ms(serial_fn, reps);
    const double p = time_ms(par_fn, reps);
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, s, p, s / p);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (compiled without OpenMP)\n");
#endif
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng(7);
    auto randomize = [&](Tensor& t) {
        for (float& v : t.v) v = rng.normal();
    };

    {
        // conv2d 16x3x64x32 -> 16 channels, k=3 s=2
        k::ConvDims d{16, 3, 64, 32, 16, 3, 2, 1, 32, 16};
        Tensor x({d.n, d.ci, d.h, d.w}), w({d.co, d.ci, d.k, d.k}), y({d.n, d.co, d.ho, d.wo});
        randomize(x);
        randomize(w);
        report(
            "conv 16x3x64x32 -> 16 s2",
            [&] { k::serial::conv2d_forward(x.data(), w.data(), nullptr, y.data(), d); },
            [&] { k::par::conv2d_forward(x.data(), w.data(), nullptr, y.data(), d); }, 20);
    }
    {
        // conv2d 16x64x8x4 -> 64, k=3 s=1 (deep stage)
        k::ConvDims d{16, 64, 8, 4, 64, 3, 1, 1, 8, 4};
        Tensor x({d.n, d.ci, d.h, d.w}), w({d.co, d.ci, d.k, d.k}), y({d.n, d.co, d.ho, d.wo});
        Tensor dx(x.shape), dw(w.shape);
        randomize(x);
        randomize(w);
        report(
            "conv 16x64x8x4 -> 64 fwd",
            [&] { k::serial::conv2d_forward(x.data(), w.data(), nullptr, y.data(), d); },
            [&] { k::par::conv2d_forward(x.data(), w.data(), nullptr, y.data(), d); }, 50);
        randomize(y);
        report(
            "conv 16x64x8x4 bwd input",
            [&] { k::serial::conv2d_backward_input(y.data(), w.data(), dx.data(), d); },
            [&] { k::par::conv2d_backward_input(y.data(), w.data(), dx.data(), d); }, 50);
        report(
            "conv 16x64x8x4 bwd params",
            [&] { k::serial::conv2d_backward_params(x.data(), y.data(), dw.data(), nullptr, d); },
            [&] { k::par::conv2d_backward_params(x.data(), y.data(), dw.data(), nullptr, d); },
            50);
    }
    {
        const int n = 16, c = 64, h = 16, w = 8;
        Tensor x({n, c, h, w}), y(x.shape), gamma(Tensor::full({c}, 1.0f)), beta({c});
        Tensor sm({c}), si({c}), rm({c}), rv(Tensor::full({c}, 1.0f));
        randomize(x);
        report(
            "batchnorm 16x64x16x8 train",
            [&] {
                k::serial::bn2d_forward_train(x.data(), gamma.data(), beta.data(), y.data(),
                                              sm.data(), si.data(), rm.data(), rv.data(), 1e-5f,
                                              0.1f, n, c, h, w);
            },
            [&] {
                k::par::bn2d_forward_train(x.data(), gamma.data(), beta.data(), y.data(),
                                           sm.data(), si.data(), rm.data(), rv.data(), 1e-5f,
                                           0.1f, n, c, h, w);
            },
            100);
    }
    {
        const int q = 200, g = 200, c = 64;
        Tensor qm({q, c}), gm({g, c}), d({q, g});
        randomize(qm);
        randomize(gm);
        report(
            "distance 200x200x64",
            [&] { k::serial::distance_matrix(qm.data(), gm.data(), d.data(), q, g, c); },
            [&] { k::par::distance_matrix(qm.data(), gm.data(), d.data(), q, g, c); }, 100);
    }
    return 0;
}
