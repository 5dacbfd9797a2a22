#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ctseg/volume.hpp"

namespace ctseg {

// Dense row-major tensor. Activation layout is N x C x D x H x W; conv
// weights are Cout x Cin x k x k x k; biases are flat C.
template <class T>
struct TensorT {
    std::vector<std::int64_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), T{0});
    }

    static std::int64_t numel_of(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (std::int64_t v : s) {
            if (v < 0) throw UsageError("tensor shape components must be non-negative");
            n *= v;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    std::int64_t dim(std::size_t i) const { return shape.at(i); }
    int rank() const { return static_cast<int>(shape.size()); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }
};

using Tensor = TensorT<float>;

template <class T>
bool all_finite(const TensorT<T>& t) {
    for (T v : t.data) {
        if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
}

// Trainable tensor paired with its gradient accumulator.
template <class T>
struct ParameterT {
    std::string name;
    TensorT<T> value;
    TensorT<T> grad;

    ParameterT() = default;
    ParameterT(std::string n, TensorT<T> v)
        : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
};

using Parameter = ParameterT<float>;

}  // namespace ctseg
