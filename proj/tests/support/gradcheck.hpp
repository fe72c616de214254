#pragma once

// Central finite-difference harness for the 64-bit gradient-check mode.
// Analytic gradients come from one backward() sweep; each sampled coordinate
// is then perturbed by +/- h and the loss re-evaluated.

#include <cmath>
#include <functional>
#include <vector>

#include "ltcf/autograd.hpp"
#include "ltcf/random.hpp"

namespace gradcheck {

struct Report {
    int tested = 0;
    int passed = 0;
    int skipped = 0;
    double worst_rel = 0.0;

    double pass_rate() const {
        return tested == 0 ? 1.0 : static_cast<double>(passed) / static_cast<double>(tested);
    }
    bool ok(double min_rate = 0.95) const { return pass_rate() >= min_rate; }
};

/// leaves: double-mode nodes whose gradients are under test (requires_grad
/// must already be set). eval() rebuilds the graph from current leaf values
/// and returns the scalar loss (forward only). eval_backward() builds the
/// graph once and runs ltcf::backward so leaf grads are populated.
/// guard(leaf, coord) may veto coordinates sitting on a non-differentiable
/// kink.
inline Report check(const std::vector<ltcf::ValueT<double>>& leaves,
                    const std::function<double()>& eval,
                    const std::function<void()>& eval_backward, uint64_t seed,
                    int coords_per_leaf = 6, double h = 1e-4, double tol = 1e-2,
                    const std::function<bool(const ltcf::ValueT<double>&, size_t)>& guard = {}) {
    for (auto& leaf : leaves) {
        leaf->ensure_grad();
        leaf->zero_grad();
    }
    eval_backward();

    Report rep;
    ltcf::Rng rng(seed);
    for (auto& leaf : leaves) {
        const size_t n = leaf->value.numel();
        for (int c = 0; c < coords_per_leaf; ++c) {
            const size_t i = rng.below(static_cast<uint32_t>(n));
            if (guard && guard(leaf, i)) {
                ++rep.skipped;
                continue;
            }
            const double v0 = leaf->value.data[i];
            leaf->value.data[i] = v0 + h;
            const double fp = eval();
            leaf->value.data[i] = v0 - h;
            const double fm = eval();
            leaf->value.data[i] = v0;
            const double fd = (fp - fm) / (2.0 * h);
            const double an = leaf->grad.data[i];
            const double rel = std::abs(an - fd) / (std::abs(fd) + 1e-6);
            ++rep.tested;
            if (rel <= tol) {
                ++rep.passed;
            }
            rep.worst_rel = std::max(rep.worst_rel, rel);
        }
    }
    return rep;
}

}  // namespace gradcheck
