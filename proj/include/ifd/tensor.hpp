#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifd {

// Dense row-major float tensor. Rank 1..4, NCHW for feature maps.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        v.assign(numel_of(shape), 0.0f);
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return s.empty() ? 0 : n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, float value) {
        Tensor t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    std::size_t numel() const { return v.size(); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape.size()); }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    float& operator()(int i) { return v[static_cast<std::size_t>(i)]; }
    float operator()(int i) const { return v[static_cast<std::size_t>(i)]; }

    float& operator()(int i, int j) {
        return v[static_cast<std::size_t>(i) * shape[1] + j];
    }
    float operator()(int i, int j) const {
        return v[static_cast<std::size_t>(i) * shape[1] + j];
    }

    float& operator()(int i, int j, int k) {
        return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }
    float operator()(int i, int j, int k) const {
        return v[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
    }

    float& operator()(int i, int j, int k, int l) {
        return v[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    float operator()(int i, int j, int k, int l) const {
        return v[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(float x) { std::fill(v.begin(), v.end(), x); }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

inline void check_shape(const Tensor& t, const std::vector<int>& want, const char* what) {
    if (t.shape != want) {
        Tensor w(want);
        throw std::invalid_argument(std::string(what) + ": expected shape " + w.shape_str() +
                                    ", got " + t.shape_str());
    }
}

} // namespace ifd
