#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ltcf/autograd.hpp"
#include "ltcf/random.hpp"

namespace ltcf {

namespace detail {

inline std::pair<int, int> fan_in_out(const std::vector<int>& shape) {
    switch (shape.size()) {
        case 1:
            return {shape[0], shape[0]};
        case 2:
            return {shape[0], shape[1]};
        case 3:  // depthwise kernel kh x kw x C
            return {shape[0] * shape[1], shape[0] * shape[1]};
        case 4:  // kh x kw x Cin x Cout
            return {shape[0] * shape[1] * shape[2], shape[0] * shape[1] * shape[3]};
        default:
            throw ShapeError("no fan rule for rank " + std::to_string(shape.size()));
    }
}

}  // namespace detail

/// Owns every trainable leaf of a model. Creation order is fixed by the
/// builders, so a given seed always produces bit-identical parameters.
template <typename T>
class ParamRegistryT {
public:
    explicit ParamRegistryT(uint64_t seed) : rng_(seed) {}

    /// Uniform init in +/- sqrt(6 / (fan_in + fan_out)).
    ValueT<T> uniform_init(const std::string& name, std::vector<int> shape) {
        auto [fi, fo] = detail::fan_in_out(shape);
        const double bound = std::sqrt(6.0 / static_cast<double>(fi + fo));
        TensorT<T> t(shape);
        for (auto& v : t.data) v = static_cast<T>(rng_.uniform(-bound, bound));
        return add_param(name, std::move(t));
    }

    /// Constant init (layer-norm gains start at 1, biases at 0).
    ValueT<T> const_init(const std::string& name, std::vector<int> shape, double value) {
        TensorT<T> t(std::move(shape));
        t.fill(static_cast<T>(value));
        return add_param(name, std::move(t));
    }

    const std::vector<ValueT<T>>& params() const { return params_; }

    ValueT<T> find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second];
    }

    size_t total_scalars() const {
        size_t n = 0;
        for (const auto& p : params_) n += p->value.numel();
        return n;
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

private:
    ValueT<T> add_param(const std::string& name, TensorT<T> t) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        auto node = parameter<T>(name, std::move(t));
        index_[name] = params_.size();
        params_.push_back(node);
        return node;
    }

    Rng rng_;
    std::vector<ValueT<T>> params_;
    std::unordered_map<std::string, size_t> index_;
};

using ParamRegistry = ParamRegistryT<float>;

}  // namespace ltcf
