#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ifd {

// splitmix64 generator. Single u64 state so checkpoints can capture and
// restore the stream exactly. All derived draws (uniform, normal, shuffle)
// are pinned here rather than delegated to <random>, whose distributions
// are implementation-defined.
struct Rng {
    std::uint64_t state = 0;

    Rng() : Rng(0) {}
    explicit Rng(std::uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    // Box-Muller without the cached second value, so the state alone
    // reproduces the stream.
    float normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                                  std::cos(2.0 * 3.14159265358979323846 * u2));
    }

    // [0, n)
    std::uint32_t below(std::uint32_t n) {
        return n == 0 ? 0 : static_cast<std::uint32_t>(next() % n);
    }

    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (std::size_t i = xs.size(); i > 1; --i) {
            std::size_t j = below(static_cast<std::uint32_t>(i));
            std::swap(xs[i - 1], xs[j]);
        }
    }
};

} // namespace ifd
