#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ltcf/ops.hpp"
#include "ltcf/params.hpp"

namespace ltcf {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Multi-head self-attention over spatial tokens
// ---------------------------------------------------------------------------

template <typename T>
struct MhsaBlockT {
    int channels = 0;
    int heads = 0;
    int max_tokens = 0;
    std::vector<ValueT<T>> wq, wk, wv;  // per head, dk x dk
    ValueT<T> w_out;                    // C x C
    ValueT<T> posenc;                   // depthwise 3x3xC
    bool use_posenc = true;

    static MhsaBlockT build(ParamRegistryT<T>& reg, const std::string& prefix, int channels,
                            int heads, int max_tokens) {
        if (heads < 1 || channels % heads != 0) {
            throw ConfigError("MHSA channels " + std::to_string(channels) +
                              " not divisible by heads " + std::to_string(heads));
        }
        MhsaBlockT b;
        b.channels = channels;
        b.heads = heads;
        b.max_tokens = max_tokens;
        const int dk = channels / heads;
        for (int h = 0; h < heads; ++h) {
            const std::string hp = prefix + ".h" + std::to_string(h);
            b.wq.push_back(reg.uniform_init(hp + ".wq", {dk, dk}));
            b.wk.push_back(reg.uniform_init(hp + ".wk", {dk, dk}));
            b.wv.push_back(reg.uniform_init(hp + ".wv", {dk, dk}));
        }
        b.w_out = reg.uniform_init(prefix + ".wout", {channels, channels});
        b.posenc = reg.uniform_init(prefix + ".posenc", {3, 3, channels});
        return b;
    }

    /// Reshape HxWxC to HW tokens, run per-head scaled dot-product attention,
    /// concatenate, project, and add the positional encoding.
    ValueT<T> forward(const ValueT<T>& f_in) const {
        if (f_in->value.rank() != 3 || f_in->value.dim(2) != channels) {
            throw ShapeError("MHSA expects HxWx" + std::to_string(channels) + ", got " +
                             f_in->value.shape_str());
        }
        const int h = f_in->value.dim(0), w = f_in->value.dim(1);
        const int tokens = h * w;
        if (max_tokens > 0 && tokens > max_tokens) {
            throw ResourceError("MHSA token count " + std::to_string(tokens) +
                                " exceeds the limit of " + std::to_string(max_tokens) +
                                "; downscale the input or raise max_attention_tokens");
        }
        const int dk = channels / heads;
        const double scale_qk = 1.0 / std::sqrt(static_cast<double>(dk));

        auto x = reshape(f_in, {tokens, channels});
        std::vector<ValueT<T>> head_outs;
        head_outs.reserve(static_cast<size_t>(heads));
        for (int hd = 0; hd < heads; ++hd) {
            auto xi = slice_lastdim(x, hd * dk, (hd + 1) * dk);
            // scaling Q up front instead of the NxN logit matrix is identical
            // algebra at a fraction of the traffic
            auto q = scale(matmul(xi, wq[static_cast<size_t>(hd)]), scale_qk);
            auto k = matmul(xi, wk[static_cast<size_t>(hd)]);
            auto v = matmul(xi, wv[static_cast<size_t>(hd)]);
            auto attn = softmax_rows(matmul(q, transpose2d(k)));
            head_outs.push_back(matmul(attn, v));
        }
        auto concat = heads == 1 ? head_outs[0] : concat_lastdim(head_outs);
        auto projected = matmul(concat, w_out);
        auto spatial = reshape(projected, {h, w, channels});
        if (!use_posenc) return spatial;
        return add(spatial, depthwise_conv2d(spatial, posenc, Pad::Same));
    }
};

template <typename T>
inline ValueT<T> mhsa_forward(const MhsaBlockT<T>& block, const ValueT<T>& f_in) {
    return block.forward(f_in);
}

// ---------------------------------------------------------------------------
// Channel Denoising block: four-scale U-shaped encoder/decoder with an
// attention bottleneck and additive skip connections
// ---------------------------------------------------------------------------

struct CdWidths {
    int w0 = 16;  // entry / full resolution
    int w1 = 32;  // H/2
    int w2 = 64;  // H/4
    int w3 = 64;  // H/8 (bottleneck)
};

template <typename T>
struct CdBlockT {
    CdWidths widths;
    ValueT<T> entry;              // 3x3x1xw0, stride 1
    ValueT<T> enc1, enc2, enc3;   // 3x3 stride 2
    MhsaBlockT<T> bottleneck;     // at w3
    ValueT<T> dec1, dec2, dec3;   // 3x3 deconv stride 2
    ValueT<T> refine, out_conv;   // 3x3xw0xw0, 3x3xw0x1

    static CdBlockT build(ParamRegistryT<T>& reg, const std::string& prefix, CdWidths ws,
                          int heads, int max_tokens) {
        CdBlockT b;
        b.widths = ws;
        b.entry = reg.uniform_init(prefix + ".entry", {3, 3, 1, ws.w0});
        b.enc1 = reg.uniform_init(prefix + ".enc1", {3, 3, ws.w0, ws.w1});
        b.enc2 = reg.uniform_init(prefix + ".enc2", {3, 3, ws.w1, ws.w2});
        b.enc3 = reg.uniform_init(prefix + ".enc3", {3, 3, ws.w2, ws.w3});
        b.bottleneck = MhsaBlockT<T>::build(reg, prefix + ".mhsa", ws.w3, heads, max_tokens);
        b.dec1 = reg.uniform_init(prefix + ".dec1", {3, 3, ws.w3, ws.w2});
        b.dec2 = reg.uniform_init(prefix + ".dec2", {3, 3, ws.w2, ws.w1});
        b.dec3 = reg.uniform_init(prefix + ".dec3", {3, 3, ws.w1, ws.w0});
        b.refine = reg.uniform_init(prefix + ".refine", {3, 3, ws.w0, ws.w0});
        b.out_conv = reg.uniform_init(prefix + ".out", {3, 3, ws.w0, 1});
        return b;
    }

    ValueT<T> forward(const ValueT<T>& plane) const {
        if (plane->value.rank() != 3 || plane->value.dim(2) != 1) {
            throw ShapeError("CD block expects HxWx1, got " + plane->value.shape_str());
        }
        const int h = plane->value.dim(0), w = plane->value.dim(1);
        const int ph = (8 - h % 8) % 8, pw = (8 - w % 8) % 8;
        auto x = plane;
        if (ph || pw) x = pad_reflect(x, 0, ph, 0, pw);

        auto f0 = leaky_relu(conv2d(x, entry, 1, Pad::Same), kLeakySlope);
        auto f1 = leaky_relu(conv2d(f0, enc1, 2, Pad::Same), kLeakySlope);
        auto f2 = leaky_relu(conv2d(f1, enc2, 2, Pad::Same), kLeakySlope);
        auto f3 = leaky_relu(conv2d(f2, enc3, 2, Pad::Same), kLeakySlope);
        auto bott = bottleneck.forward(f3);
        auto g1 = add(leaky_relu(deconv2d(bott, dec1, 2), kLeakySlope), f2);
        auto g2 = add(leaky_relu(deconv2d(g1, dec2, 2), kLeakySlope), f1);
        auto g3 = add(leaky_relu(deconv2d(g2, dec3, 2), kLeakySlope), f0);
        auto refined = leaky_relu(conv2d(g3, refine, 1, Pad::Same), kLeakySlope);
        auto y = tanh_act(conv2d(refined, out_conv, 1, Pad::Same));
        if (ph || pw) y = crop(y, 0, 0, h, w);
        return y;
    }
};

template <typename T>
inline ValueT<T> cd_forward(const CdBlockT<T>& block, const ValueT<T>& plane) {
    return block.forward(plane);
}

// ---------------------------------------------------------------------------
// Multi-stage Squeeze-and-Excite Fusion
// ---------------------------------------------------------------------------

template <typename T>
struct MsefBlockT {
    int channels = 0;
    int reduced = 0;
    ValueT<T> ln_gain, ln_bias;
    ValueT<T> w1;  // C x Cr
    ValueT<T> w2;  // Cr x C

    static MsefBlockT build(ParamRegistryT<T>& reg, const std::string& prefix, int channels,
                            int reduction = 4) {
        MsefBlockT b;
        b.channels = channels;
        b.reduced = std::max(1, channels / reduction);
        b.ln_gain = reg.const_init(prefix + ".ln_gain", {channels}, 1.0);
        b.ln_bias = reg.const_init(prefix + ".ln_bias", {channels}, 0.0);
        b.w1 = reg.uniform_init(prefix + ".w1", {channels, b.reduced});
        b.w2 = reg.uniform_init(prefix + ".w2", {b.reduced, channels});
        return b;
    }

    /// D_re = ReLU(W1 . GAP(LN(F)));  out = Tanh(W2 . D_re) * LN(F) + F
    ValueT<T> forward(const ValueT<T>& f_in) const {
        if (f_in->value.rank() != 3 || f_in->value.dim(2) != channels) {
            throw ShapeError("MSEF expects HxWx" + std::to_string(channels));
        }
        auto ln = layer_norm(f_in, ln_gain, ln_bias, kLayerNormEps);
        auto pooled = reshape(global_avg_pool(ln), {1, channels});
        auto d_re = relu(matmul(pooled, w1));
        auto gate = tanh_act(matmul(d_re, w2));
        auto d_ex = mul_channels(ln, reshape(gate, {1, 1, channels}));
        return add(d_ex, f_in);
    }
};

template <typename T>
inline ValueT<T> msef_forward(const MsefBlockT<T>& block, const ValueT<T>& f_in) {
    return block.forward(f_in);
}

// ---------------------------------------------------------------------------
// Fourier Branch Processing: learned filtering of the luminance spectrum,
// real and imaginary planes filtered by separate conv stacks
// ---------------------------------------------------------------------------

template <typename T>
struct FbpBlockT {
    ValueT<T> re_c1, re_c2, re_c3;  // 1->16, 16->16, 16->1
    ValueT<T> im_c1, im_c2, im_c3;

    static FbpBlockT build(ParamRegistryT<T>& reg, const std::string& prefix, int width = 16) {
        FbpBlockT b;
        b.re_c1 = reg.uniform_init(prefix + ".re.c1", {3, 3, 1, width});
        b.re_c2 = reg.uniform_init(prefix + ".re.c2", {3, 3, width, width});
        b.re_c3 = reg.uniform_init(prefix + ".re.c3", {3, 3, width, 1});
        b.im_c1 = reg.uniform_init(prefix + ".im.c1", {3, 3, 1, width});
        b.im_c2 = reg.uniform_init(prefix + ".im.c2", {3, 3, width, width});
        b.im_c3 = reg.uniform_init(prefix + ".im.c3", {3, 3, width, 1});
        return b;
    }

    /// Filtered spectrum -> real-part inverse transform (equivalent to
    /// Hermitian-symmetrizing first) -> residual add with the input plane.
    ValueT<T> forward(const ValueT<T>& lum) const {
        if (lum->value.rank() != 3 || lum->value.dim(2) != 1) {
            throw ShapeError("FBP expects HxWx1, got " + lum->value.shape_str());
        }
        const int h = lum->value.dim(0), w = lum->value.dim(1);
        auto spectrum = fft2_stack(reshape(lum, {h, w}));
        auto re_part = slice_lastdim(spectrum, 0, 1);
        auto im_part = slice_lastdim(spectrum, 1, 2);

        auto run = [&](const ValueT<T>& p, const ValueT<T>& c1, const ValueT<T>& c2,
                       const ValueT<T>& c3) {
            auto a = leaky_relu(conv2d(p, c1, 1, Pad::Same), kLeakySlope);
            return conv2d(conv2d(a, c2, 1, Pad::Same), c3, 1, Pad::Same);
        };
        auto re_f = run(re_part, re_c1, re_c2, re_c3);
        auto im_f = run(im_part, im_c1, im_c2, im_c3);

        auto filtered = concat_lastdim<T>({re_f, im_f});
        auto spatial = ifft2_real(filtered);
        return add(reshape(spatial, {h, w, 1}), lum);
    }

    /// Max |imag| of the inverse transform of the filtered spectrum; the
    /// realness diagnostic used by the block invariants.
    T imag_residue(const TensorT<T>& lum_plane) const {
        auto lum = constant(lum_plane);
        const int h = lum_plane.dim(0), w = lum_plane.dim(1);
        auto spectrum = fft2_stack(reshape(lum, {h, w}));
        auto re_part = slice_lastdim(spectrum, 0, 1);
        auto im_part = slice_lastdim(spectrum, 1, 2);
        auto run = [&](const ValueT<T>& p, const ValueT<T>& c1, const ValueT<T>& c2,
                       const ValueT<T>& c3) {
            auto a = leaky_relu(conv2d(p, c1, 1, Pad::Same), kLeakySlope);
            return conv2d(conv2d(a, c2, 1, Pad::Same), c3, 1, Pad::Same);
        };
        auto re_f = run(re_part, re_c1, re_c2, re_c3)->value;
        auto im_f = run(im_part, im_c1, im_c2, im_c3)->value;
        // Hermitian-symmetrize, invert, measure the imaginary residue
        TensorT<T> sre({h, w}), sim({h, w});
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int my = (h - y) % h, mx = (w - x) % w;
                sre.at(y, x) = static_cast<T>(0.5) * (re_f.at(y, x, 0) + re_f.at(my, mx, 0));
                sim.at(y, x) = static_cast<T>(0.5) * (im_f.at(y, x, 0) - im_f.at(my, mx, 0));
            }
        }
        TensorT<T> resid;
        (void)ifft2(ComplexTensorT<T>(std::move(sre), std::move(sim)), &resid);
        return resid.max_abs();
    }
};

template <typename T>
inline ValueT<T> fbp_forward(const FbpBlockT<T>& block, const ValueT<T>& lum) {
    return block.forward(lum);
}

}  // namespace ltcf
