#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ltcf/errors.hpp"

namespace ltcf {

/// Dense row-major tensor. The scalar type is a template parameter so that
/// the same operator code runs in 32-bit training mode and in the 64-bit
/// gradient-check mode.
template <typename T>
struct TensorT {
    std::vector<int> shape;
    std::vector<T> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }

    TensorT(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (count(shape) != data.size()) {
            throw ShapeError("tensor data size " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
    }

    static size_t count(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
            n *= static_cast<size_t>(d);
        }
        return n;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
        os << "]";
        return os.str();
    }

    size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    std::string shape_str() const { return shape_str(shape); }

    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    // 2-D access (rows x cols)
    T& at(int i, int j) { return data[static_cast<size_t>(i) * shape[1] + j]; }
    const T& at(int i, int j) const { return data[static_cast<size_t>(i) * shape[1] + j]; }

    // 3-D access (H x W x C)
    T& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * shape[1] + x) * shape[2] + c];
    }
    const T& at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * shape[1] + x) * shape[2] + c];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (T v : data) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

    T max_abs() const {
        T m = T(0);
        for (T v : data) m = std::max(m, static_cast<T>(std::abs(static_cast<double>(v))));
        return m;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }

    static TensorT full(std::vector<int> s, T v) {
        TensorT t(std::move(s));
        t.fill(v);
        return t;
    }

    static TensorT zeros(std::vector<int> s) { return TensorT(std::move(s)); }

    static TensorT scalar(T v) { return TensorT({1}, {v}); }
};

using Tensor = TensorT<float>;

/// Frequency-domain value: real and imaginary planes of equal shape.
template <typename T>
struct ComplexTensorT {
    TensorT<T> real;
    TensorT<T> imag;

    ComplexTensorT() = default;
    ComplexTensorT(TensorT<T> re, TensorT<T> im) : real(std::move(re)), imag(std::move(im)) {
        if (!real.same_shape(imag)) {
            throw ShapeError("complex tensor parts differ: " + real.shape_str() + " vs " +
                             imag.shape_str());
        }
    }
};

using ComplexTensor = ComplexTensorT<float>;

template <typename T>
inline void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
    }
}

}  // namespace ltcf
