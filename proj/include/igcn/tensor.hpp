#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "igcn/common.hpp"

namespace igcn {

// Dense row-major array with a dynamic shape. Images are stored H x W x C,
// per-vertex matrices n x F. Only the handful of shapes the network needs.
template <typename S>
struct Tensor {
    std::vector<int> shape;
    std::vector<S> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
        v.assign(static_cast<std::size_t>(numel(shape)), S(0));
    }
    Tensor(std::vector<int> shape_, std::vector<S> data) : shape(std::move(shape_)), v(std::move(data)) {
        if (static_cast<std::int64_t>(v.size()) != numel(shape))
            throw ValidationError("tensor: data size does not match shape");
    }

    static std::int64_t numel(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ValidationError("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    S* data() { return v.data(); }
    const S* data() const { return v.data(); }

    void fill(S value) { std::fill(v.begin(), v.end(), value); }

    // 2D access (n x F matrices).
    S& at(int i, int j) { return v[static_cast<std::size_t>(i) * shape[1] + j]; }
    S at(int i, int j) const { return v[static_cast<std::size_t>(i) * shape[1] + j]; }

    // 3D access (H x W x C maps).
    S& at(int y, int x, int c) {
        return v[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
    }
    S at(int y, int x, int c) const {
        return v[(static_cast<std::size_t>(y) * shape[1] + x) * shape[2] + c];
    }

    template <typename T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.v.resize(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
        return out;
    }
};

template <typename S>
bool same_shape(const Tensor<S>& a, const Tensor<S>& b) {
    return a.shape == b.shape;
}

} // namespace igcn
