#pragma once

#include <vector>

#include "ltcf/random.hpp"
#include "ltcf/tensor.hpp"

namespace testutil {

template <typename T>
inline ltcf::TensorT<T> random_tensor(std::vector<int> shape, ltcf::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
    ltcf::TensorT<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
    return t;
}

template <typename T>
inline double max_abs_diff(const ltcf::TensorT<T>& a, const ltcf::TensorT<T>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    }
    return m;
}

}  // namespace testutil
