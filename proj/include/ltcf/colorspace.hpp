#pragma once

#include <array>
#include <cmath>

#include "ltcf/ops.hpp"
#include "ltcf/tensor.hpp"

namespace ltcf {

enum class ColorSpace { RGB, LAB, YUV };

inline const char* to_string(ColorSpace s) {
    switch (s) {
        case ColorSpace::RGB: return "RGB";
        case ColorSpace::LAB: return "LAB";
        default: return "YUV";
    }
}

/// Reference-white tristimulus values (Y scaled to 100). Defaults to D65.
struct WhitePoint {
    double xn = 95.047;
    double yn = 100.0;
    double zn = 108.883;
};

/// An image decomposed into three named channel planes with its color space.
/// RGB planes are clamped to [0,1] on construction via make_rgb_image;
/// gamut_clamped records whether an inverse transform had to clip.
template <typename T>
struct ImagePlanesT {
    ColorSpace space = ColorSpace::RGB;
    TensorT<T> planes;  // HxWx3
    bool gamut_clamped = false;
};

using ImagePlanes = ImagePlanesT<float>;

/// Nominal per-channel value ranges used to scale planes into [-1,1] for the
/// network. a*/b* are unbounded in principle; +/-110 covers the sRGB gamut.
inline std::array<std::pair<double, double>, 3> channel_ranges(ColorSpace s) {
    switch (s) {
        case ColorSpace::RGB:
            return {{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}};
        case ColorSpace::LAB:
            return {{{0.0, 100.0}, {-110.0, 110.0}, {-110.0, 110.0}}};
        default:
            return {{{0.0, 1.0}, {-0.436, 0.436}, {-0.615, 0.615}}};
    }
}

namespace colorspace_detail {

// Y = 0.299 R + 0.587 G + 0.114 B, and the companions
inline constexpr std::array<double, 9> kRgbToYuv = {
    0.299, 0.587, 0.114, -0.14713, -0.28886, 0.436, 0.615, -0.51499, -0.10001};

// analytic inverse of the matrix above, embedded to 6 decimals
inline constexpr std::array<double, 9> kYuvToRgb = {
    1.000000, -0.000012, 1.139835, 1.000004, -0.394646, -0.580594, 0.999980, 2.032112, -0.000015};

// linear RGB -> XYZ (sRGB primaries, D65), XYZ on the [0,1]-ish scale
inline constexpr std::array<double, 9> kRgbToXyz = {
    0.4124564, 0.3575761, 0.1804375, 0.2126729, 0.7151522, 0.0721750,
    0.0193339, 0.1191920, 0.9503041};

inline constexpr std::array<double, 9> kXyzToRgb = {
    3.2404542, -1.5371385, -0.4985314, -0.9692660, 1.8760108, 0.0415560,
    0.0556434, -0.2040259, 1.0572252};

inline constexpr double kDelta = 6.0 / 29.0;
inline constexpr double kDelta3 = kDelta * kDelta * kDelta;
inline constexpr double kSlope = 1.0 / (3.0 * kDelta * kDelta);  // linear-branch slope

inline double lab_f(double t) {
    return t > kDelta3 ? std::cbrt(t) : t * kSlope + 4.0 / 29.0;
}

inline double lab_f_inv(double u) {
    return u > kDelta ? u * u * u : (u - 4.0 / 29.0) / kSlope;
}

}  // namespace colorspace_detail

// ---------------------------------------------------------------------------
// graph-level transforms (differentiable; used inside the model)
// ---------------------------------------------------------------------------

/// CIE f: cube root with a C1 linear continuation below (6/29)^3.
template <typename T>
inline ValueT<T> lab_f_op(const ValueT<T>& x) {
    using namespace colorspace_detail;
    return detail::unary_op(
        x, [](T v) { return static_cast<T>(lab_f(static_cast<double>(v))); },
        [](T v) {
            const double t = static_cast<double>(v);
            if (t > kDelta3) {
                const double c = std::cbrt(t);
                return static_cast<T>(1.0 / (3.0 * c * c));
            }
            return static_cast<T>(kSlope);
        });
}

template <typename T>
inline ValueT<T> lab_f_inv_op(const ValueT<T>& x) {
    using namespace colorspace_detail;
    return detail::unary_op(
        x, [](T v) { return static_cast<T>(lab_f_inv(static_cast<double>(v))); },
        [](T v) {
            const double u = static_cast<double>(v);
            return static_cast<T>(u > kDelta ? 3.0 * u * u : 1.0 / kSlope);
        });
}

template <typename T>
inline ValueT<T> rgb_to_yuv_graph(const ValueT<T>& rgb) {
    return pixel_mat3(rgb, colorspace_detail::kRgbToYuv);
}

template <typename T>
inline ValueT<T> yuv_to_rgb_graph(const ValueT<T>& yuv) {
    return pixel_mat3(yuv, colorspace_detail::kYuvToRgb);
}

template <typename T>
inline ValueT<T> rgb_to_lab_graph(const ValueT<T>& rgb, const WhitePoint& wp = {}) {
    using namespace colorspace_detail;
    // fold the white-point division into the matrix so t = ratios directly
    std::array<double, 9> m = kRgbToXyz;
    const double scales[3] = {100.0 / wp.xn, 100.0 / wp.yn, 100.0 / wp.zn};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m[static_cast<size_t>(r * 3 + c)] *= scales[r];
    auto ratios = pixel_mat3(rgb, m);
    auto f = lab_f_op(ratios);
    // L = 116 fy - 16 ; a = 500 (fx - fy) ; b = 200 (fy - fz)
    const std::array<double, 9> a = {0.0, 116.0, 0.0, 500.0, -500.0, 0.0, 0.0, 200.0, -200.0};
    auto lab = pixel_mat3(f, a);
    return affine_channels(lab, {1.0, 1.0, 1.0}, {-16.0, 0.0, 0.0});
}

/// Inverse of rgb_to_lab_graph. The gamut clamp is straight-through so
/// training gradients survive mild excursions outside [0,1].
template <typename T>
inline ValueT<T> lab_to_rgb_graph(const ValueT<T>& lab, const WhitePoint& wp = {},
                                  bool clamp_gamut = true) {
    using namespace colorspace_detail;
    // fx = (L+16)/116 + a/500 ; fy = (L+16)/116 ; fz = (L+16)/116 - b/200
    const std::array<double, 9> b = {1.0 / 116.0, 1.0 / 500.0, 0.0, 1.0 / 116.0, 0.0, 0.0,
                                     1.0 / 116.0, 0.0, -1.0 / 200.0};
    auto f = affine_channels(pixel_mat3(lab, b),
                             {1.0, 1.0, 1.0},
                             {16.0 / 116.0, 16.0 / 116.0, 16.0 / 116.0});
    auto ratios = lab_f_inv_op(f);
    auto xyz = affine_channels(ratios, {wp.xn / 100.0, wp.yn / 100.0, wp.zn / 100.0},
                               {0.0, 0.0, 0.0});
    auto rgb = pixel_mat3(xyz, kXyzToRgb);
    return clamp_gamut ? clamp_st(rgb, 0.0, 1.0, 0.1) : rgb;
}

/// Affine per-channel map into [-1,1] using the space's range metadata.
template <typename T>
inline ValueT<T> normalize_graph(const ValueT<T>& planes, ColorSpace space) {
    auto r = channel_ranges(space);
    std::vector<double> sc(3), off(3);
    for (int c = 0; c < 3; ++c) {
        const double lo = r[static_cast<size_t>(c)].first, hi = r[static_cast<size_t>(c)].second;
        sc[static_cast<size_t>(c)] = 2.0 / (hi - lo);
        off[static_cast<size_t>(c)] = -(hi + lo) / (hi - lo);
    }
    return affine_channels(planes, std::move(sc), std::move(off));
}

template <typename T>
inline ValueT<T> denormalize_graph(const ValueT<T>& net_out, ColorSpace space) {
    auto r = channel_ranges(space);
    std::vector<double> sc(3), off(3);
    for (int c = 0; c < 3; ++c) {
        const double lo = r[static_cast<size_t>(c)].first, hi = r[static_cast<size_t>(c)].second;
        sc[static_cast<size_t>(c)] = (hi - lo) / 2.0;
        off[static_cast<size_t>(c)] = (hi + lo) / 2.0;
    }
    return affine_channels(net_out, std::move(sc), std::move(off));
}

// ---------------------------------------------------------------------------
// value-level API
// ---------------------------------------------------------------------------

/// Ingests raw RGB data, clamping to [0,1] per the ImagePlanes invariant.
template <typename T>
inline ImagePlanesT<T> make_rgb_image(TensorT<T> planes) {
    if (planes.rank() != 3 || planes.dim(2) != 3) {
        throw ShapeError("image planes must be HxWx3, got " + planes.shape_str());
    }
    for (auto& v : planes.data) v = std::min(std::max(v, T(0)), T(1));
    return ImagePlanesT<T>{ColorSpace::RGB, std::move(planes), false};
}

template <typename T>
inline void require_space(const ImagePlanesT<T>& img, ColorSpace want, const char* op) {
    if (img.space != want) {
        throw UsageError(std::string(op) + " expects a " + to_string(want) + " image, got " +
                         to_string(img.space));
    }
}

template <typename T>
inline ImagePlanesT<T> rgb_to_yuv(const ImagePlanesT<T>& img) {
    require_space(img, ColorSpace::RGB, "rgb_to_yuv");
    auto out = rgb_to_yuv_graph(constant(img.planes));
    return {ColorSpace::YUV, std::move(out->value), false};
}

template <typename T>
inline ImagePlanesT<T> yuv_to_rgb(const ImagePlanesT<T>& img) {
    require_space(img, ColorSpace::YUV, "yuv_to_rgb");
    auto out = yuv_to_rgb_graph(constant(img.planes));
    bool clamped = false;
    for (auto& v : out->value.data) {
        if (v < T(0) || v > T(1)) {
            // tolerance for roundtrip noise; real gamut excursions get flagged
            if (v < T(-1e-4) || v > T(1) + T(1e-4)) clamped = true;
            v = std::min(std::max(v, T(0)), T(1));
        }
    }
    return {ColorSpace::RGB, std::move(out->value), clamped};
}

template <typename T>
inline ImagePlanesT<T> rgb_to_lab(const ImagePlanesT<T>& img, const WhitePoint& wp = {}) {
    require_space(img, ColorSpace::RGB, "rgb_to_lab");
    auto out = rgb_to_lab_graph(constant(img.planes), wp);
    return {ColorSpace::LAB, std::move(out->value), false};
}

template <typename T>
inline ImagePlanesT<T> lab_to_rgb(const ImagePlanesT<T>& img, const WhitePoint& wp = {}) {
    require_space(img, ColorSpace::LAB, "lab_to_rgb");
    auto out = lab_to_rgb_graph(constant(img.planes), wp, false);
    bool clamped = false;
    for (auto& v : out->value.data) {
        if (v < T(0) || v > T(1)) {
            if (v < T(-1e-4) || v > T(1) + T(1e-4)) clamped = true;
            v = std::min(std::max(v, T(0)), T(1));
        }
    }
    return {ColorSpace::RGB, std::move(out->value), clamped};
}

template <typename T>
inline TensorT<T> normalize_for_net(const ImagePlanesT<T>& img) {
    return normalize_graph(constant(img.planes), img.space)->value;
}

template <typename T>
inline ImagePlanesT<T> denormalize_from_net(const TensorT<T>& t, ColorSpace space) {
    return {space, denormalize_graph(constant(t), space)->value, false};
}

/// sRGB electro-optical decode/encode; applied at ingestion when the CLI is
/// told the inputs are gamma-encoded.
template <typename T>
inline void srgb_decode_inplace(TensorT<T>& t) {
    for (auto& v : t.data) {
        const double x = static_cast<double>(v);
        v = static_cast<T>(x <= 0.04045 ? x / 12.92 : std::pow((x + 0.055) / 1.055, 2.4));
    }
}

template <typename T>
inline void srgb_encode_inplace(TensorT<T>& t) {
    for (auto& v : t.data) {
        const double x = std::min(std::max(static_cast<double>(v), 0.0), 1.0);
        v = static_cast<T>(x <= 0.0031308 ? x * 12.92 : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055);
    }
}

}  // namespace ltcf
