#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "ltcf/tensor.hpp"

namespace ltcf {
namespace fft_detail {

using cd = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Iterative radix-2 transform for power-of-two lengths (the common case for
/// image tiles); no allocations.
inline void fft_pow2(std::vector<cd>& a, int sign) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const cd wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                const cd u = a[i + k];
                const cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

/// Unnormalized DFT of arbitrary length: mixed-radix Cooley-Tukey splitting on
/// the smallest prime factor, direct O(n^2) evaluation once the length is
/// prime. Image sides are small here, so the prime fallback is fine.
/// sign = -1 for the forward transform, +1 for the inverse (unscaled).
inline void dft_1d(std::vector<cd>& a, int sign) {
    const size_t n = a.size();
    if (n <= 1) return;
    if ((n & (n - 1)) == 0) {
        fft_pow2(a, sign);
        return;
    }

    size_t p = 0;
    for (size_t f = 2; f * f <= n; ++f) {
        if (n % f == 0) {
            p = f;
            break;
        }
    }

    if (p == 0) {
        // prime length: direct evaluation
        std::vector<cd> out(n);
        for (size_t k = 0; k < n; ++k) {
            cd acc(0.0, 0.0);
            for (size_t t = 0; t < n; ++t) {
                double ang = sign * kTwoPi * static_cast<double>(k * t % n) / static_cast<double>(n);
                acc += a[t] * cd(std::cos(ang), std::sin(ang));
            }
            out[k] = acc;
        }
        a = std::move(out);
        return;
    }

    const size_t m = n / p;
    // decimate into p subsequences, transform each recursively
    std::vector<std::vector<cd>> sub(p, std::vector<cd>(m));
    for (size_t i = 0; i < n; ++i) sub[i % p][i / p] = a[i];
    for (auto& s : sub) dft_1d(s, sign);

    // butterfly combine with twiddles
    for (size_t k = 0; k < n; ++k) {
        cd acc(0.0, 0.0);
        for (size_t r = 0; r < p; ++r) {
            double ang = sign * kTwoPi * static_cast<double>((k * r) % n) / static_cast<double>(n);
            acc += sub[r][k % m] * cd(std::cos(ang), std::sin(ang));
        }
        a[k] = acc;
    }
}

/// In-place 2-D transform over an H x W grid stored row-major.
inline void dft_2d(std::vector<cd>& grid, int h, int w, int sign) {
    std::vector<cd> line;
    line.reserve(static_cast<size_t>(std::max(h, w)));
    for (int y = 0; y < h; ++y) {
        line.assign(grid.begin() + static_cast<size_t>(y) * w,
                    grid.begin() + static_cast<size_t>(y + 1) * w);
        dft_1d(line, sign);
        std::copy(line.begin(), line.end(), grid.begin() + static_cast<size_t>(y) * w);
    }
    for (int x = 0; x < w; ++x) {
        line.resize(static_cast<size_t>(h));
        for (int y = 0; y < h; ++y) line[static_cast<size_t>(y)] = grid[static_cast<size_t>(y) * w + x];
        dft_1d(line, sign);
        for (int y = 0; y < h; ++y) grid[static_cast<size_t>(y) * w + x] = line[static_cast<size_t>(y)];
    }
}

template <typename T>
inline std::vector<cd> to_complex_grid(const TensorT<T>& re, const TensorT<T>* im) {
    std::vector<cd> g(re.numel());
    for (size_t i = 0; i < re.numel(); ++i) {
        g[i] = cd(static_cast<double>(re.data[i]), im ? static_cast<double>(im->data[i]) : 0.0);
    }
    return g;
}

}  // namespace fft_detail

/// Forward 2-D DFT of a real H x W plane (unnormalized). Arbitrary sizes
/// supported, including non-power-of-two.
template <typename T>
inline ComplexTensorT<T> fft2(const TensorT<T>& x) {
    if (x.rank() != 2) throw ShapeError("fft2 expects an HxW tensor, got " + x.shape_str());
    const int h = x.dim(0), w = x.dim(1);
    auto grid = fft_detail::to_complex_grid(x, static_cast<const TensorT<T>*>(nullptr));
    fft_detail::dft_2d(grid, h, w, -1);
    TensorT<T> re({h, w}), im({h, w});
    for (size_t i = 0; i < grid.size(); ++i) {
        re.data[i] = static_cast<T>(grid[i].real());
        im.data[i] = static_cast<T>(grid[i].imag());
    }
    return ComplexTensorT<T>(std::move(re), std::move(im));
}

/// Inverse 2-D DFT (scaled by 1/(H*W)). Returns the real part; the imaginary
/// residue is written to *imag_out when provided.
template <typename T>
inline TensorT<T> ifft2(const ComplexTensorT<T>& z, TensorT<T>* imag_out = nullptr) {
    const int h = z.real.dim(0), w = z.real.dim(1);
    auto grid = fft_detail::to_complex_grid(z.real, &z.imag);
    fft_detail::dft_2d(grid, h, w, +1);
    const double scale = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
    TensorT<T> re({h, w});
    if (imag_out) *imag_out = TensorT<T>({h, w});
    for (size_t i = 0; i < grid.size(); ++i) {
        re.data[i] = static_cast<T>(grid[i].real() * scale);
        if (imag_out) imag_out->data[i] = static_cast<T>(grid[i].imag() * scale);
    }
    return re;
}

}  // namespace ltcf
