#pragma once

#include <cstdint>
#include <random>

namespace ltcf {

/// Seeded RNG wrapper producing floats directly from the mt19937 bit stream.
/// The mt19937 sequence is fixed by the standard, so results are bit-identical
/// across platforms (std::uniform_real_distribution is not).
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 8) * (1.0 / 16777216.0);
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (deterministic, no state cached).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-12) u1 = 1e-12;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    uint32_t next_u32() { return gen_(); }

    /// Uniform integer in [0, n).
    uint32_t below(uint32_t n) { return n == 0 ? 0 : gen_() % n; }

private:
    std::mt19937 gen_;
};

}  // namespace ltcf
