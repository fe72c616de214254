#pragma once

#include <string>
#include <vector>

#include "ltcf/checkpoint.hpp"
#include "ltcf/ops.hpp"
#include "ltcf/params.hpp"
#include "ltcf/random.hpp"

namespace ltcf {

/// The five alpha coefficients of the combined loss plus the loss-internal
/// constants. Defaults follow the training recipe.
struct LossWeights {
    double alpha1 = 0.12;   // PSNR
    double alpha2 = 0.05;   // color
    double alpha3 = 0.55;   // histogram
    double alpha4 = 0.015;  // perceptual
    double alpha5 = 0.25;   // SSIM

    double psnr_cap = 40.0;
    double mse_floor = 1e-8;

    int hist_bins = 256;
    double hist_bandwidth = 2.0 / 256.0;  // Gaussian kernel std = bandwidth/2

    double ssim_c1 = 0.01 * 0.01;  // (K1 * L)^2 with L = 1
    double ssim_c2 = 0.03 * 0.03;
    int ssim_window = 11;
    double ssim_sigma = 1.5;

    std::vector<double> perceptual_layer_weights = {1.0, 1.0, 1.0, 1.0};
};

// ---------------------------------------------------------------------------
// feature extractor for the perceptual loss
// ---------------------------------------------------------------------------

enum class ExtractorSource { SeededRandom, File };

/// Frozen stack of stride-2 convolutions producing the feature maps phi_j.
/// Weights are immutable during training (stored as plain tensors and wrapped
/// as constant graph nodes per call) and deterministic for a fixed seed or
/// file.
template <typename T>
struct FeatureExtractorT {
    std::vector<TensorT<T>> kernels;  // stage j: 3x3 x Cin x Cout, stride 2
    ExtractorSource source = ExtractorSource::SeededRandom;
    uint64_t seed = 0;

    static FeatureExtractorT seeded_random(uint64_t seed,
                                           std::vector<int> widths = {16, 32, 64, 64}) {
        FeatureExtractorT fe;
        fe.source = ExtractorSource::SeededRandom;
        fe.seed = seed;
        Rng rng(seed);
        int cin = 3;
        for (int wout : widths) {
            auto [fi, fo] = detail::fan_in_out({3, 3, cin, wout});
            const double bound = std::sqrt(6.0 / static_cast<double>(fi + fo));
            TensorT<T> k({3, 3, cin, wout});
            for (auto& v : k.data) v = static_cast<T>(rng.uniform(-bound, bound));
            fe.kernels.push_back(std::move(k));
            cin = wout;
        }
        return fe;
    }

    /// FILE mode: reads stage kernels from the shared checkpoint format
    /// (entries named stage0, stage1, ... in order).
    static FeatureExtractorT from_file(const std::string& path) {
        FeatureExtractorT fe;
        fe.source = ExtractorSource::File;
        auto ck = load_checkpoint_file(path);
        if (ck.tensors.empty()) {
            throw CheckpointCorruptError("extractor file has no tensors: " + path);
        }
        for (auto& [name, t] : ck.tensors) {
            if (t.rank() != 4) {
                throw CheckpointShapeError("extractor stage '" + name + "' is not a conv kernel");
            }
            fe.kernels.push_back(t.template cast<T>());
        }
        return fe;
    }

    void save(const std::string& path) const {
        std::vector<std::pair<std::string, const Tensor*>> entries;
        std::vector<Tensor> storage;
        storage.reserve(kernels.size());
        for (const auto& k : kernels) storage.push_back(k.template cast<float>());
        for (size_t i = 0; i < storage.size(); ++i) {
            entries.emplace_back("stage" + std::to_string(i), &storage[i]);
        }
        save_checkpoint_file(path, "{\"kind\":\"extractor\"}", entries);
    }

    /// Per-stage feature maps phi_j of an HxWx3 image.
    std::vector<ValueT<T>> features(const ValueT<T>& img) const {
        std::vector<ValueT<T>> out;
        auto v = img;
        for (const auto& k : kernels) {
            v = relu(conv2d(v, constant(k), 2, Pad::Same));
            out.push_back(v);
        }
        return out;
    }
};

using FeatureExtractor = FeatureExtractorT<float>;

// ---------------------------------------------------------------------------
// individual losses (graph-level; y_true is typically a constant node)
// ---------------------------------------------------------------------------

template <typename T>
inline ValueT<T> smooth_l1(const ValueT<T>& y_true, const ValueT<T>& y_pred) {
    check_same_shape(y_true->value, y_pred->value, "smooth_l1");
    return smooth_l1_mean(sub(y_true, y_pred));
}

/// 40 - PSNR with the MSE floored at mse_floor; identical images therefore
/// bottom out at 40 - 80 = -40.
template <typename T>
inline ValueT<T> psnr_loss(const ValueT<T>& y_true, const ValueT<T>& y_pred,
                           const LossWeights& w = {}) {
    check_same_shape(y_true->value, y_pred->value, "psnr_loss");
    auto mse = mean_all(square(sub(y_true, y_pred)));
    auto floored = max_with(mse, w.mse_floor);
    return add_const(scale(log10_val(floored), 10.0), w.psnr_cap);
}

/// Sum over channels of |mean(y_true_c) - mean(y_pred_c)|.
template <typename T>
inline ValueT<T> color_loss(const ValueT<T>& y_true, const ValueT<T>& y_pred) {
    check_same_shape(y_true->value, y_pred->value, "color_loss");
    auto mt = global_avg_pool(y_true);
    auto mp = global_avg_pool(y_pred);
    return sum_all(abs_val(sub(mt, mp)));
}

/// Soft-histogram distribution match: per channel, Gaussian-kernel histograms
/// normalized to unit mass, compared by the bin-averaged absolute difference
/// and summed over channels.
template <typename T>
inline ValueT<T> hist_loss(const ValueT<T>& y_true, const ValueT<T>& y_pred,
                           const LossWeights& w = {}) {
    check_same_shape(y_true->value, y_pred->value, "hist_loss");
    if (y_true->value.rank() != 3) throw ShapeError("hist_loss expects HxWxC");
    const int c = y_true->value.dim(2);
    const double sigma = w.hist_bandwidth / 2.0;
    ValueT<T> total;
    for (int ch = 0; ch < c; ++ch) {
        auto ht = soft_histogram(slice_lastdim(y_true, ch, ch + 1), w.hist_bins, sigma);
        auto hp = soft_histogram(slice_lastdim(y_pred, ch, ch + 1), w.hist_bins, sigma);
        auto term = mean_all(abs_val(sub(ht, hp)));
        total = total ? add(total, term) : term;
    }
    return total;
}

/// Size-normalized squared feature distances summed over extractor stages.
template <typename T>
inline ValueT<T> perceptual_loss(const FeatureExtractorT<T>& extractor, const ValueT<T>& y_true,
                                 const ValueT<T>& y_pred, const LossWeights& w = {}) {
    check_same_shape(y_true->value, y_pred->value, "perceptual_loss");
    auto ft = extractor.features(y_true);
    auto fp = extractor.features(y_pred);
    ValueT<T> total;
    for (size_t j = 0; j < ft.size(); ++j) {
        const double lw = j < w.perceptual_layer_weights.size()
                              ? w.perceptual_layer_weights[j]
                              : 1.0;
        if (lw == 0.0) continue;
        auto term = scale(mean_all(square(sub(ft[j], fp[j]))), lw);
        total = total ? add(total, term) : term;
    }
    if (!total) throw ConfigError("perceptual_loss: no active extractor layers");
    return total;
}

/// 1 - SSIM with a Gaussian window over valid positions, averaged over
/// windows and channels.
template <typename T>
inline ValueT<T> ssim_loss(const ValueT<T>& y_true, const ValueT<T>& y_pred,
                           const LossWeights& w = {}) {
    check_same_shape(y_true->value, y_pred->value, "ssim_loss");
    if (y_true->value.rank() != 3) throw ShapeError("ssim_loss expects HxWxC");
    const int h = y_true->value.dim(0), wd = y_true->value.dim(1), c = y_true->value.dim(2);
    if (h < w.ssim_window || wd < w.ssim_window) {
        throw ShapeError("ssim_loss: image " + std::to_string(h) + "x" + std::to_string(wd) +
                         " smaller than the " + std::to_string(w.ssim_window) + "-pixel window");
    }
    // normalized Gaussian window replicated per channel
    TensorT<T> win({w.ssim_window, w.ssim_window, c});
    {
        const double half = (w.ssim_window - 1) / 2.0;
        double total = 0.0;
        std::vector<double> g(static_cast<size_t>(w.ssim_window) * w.ssim_window);
        for (int y = 0; y < w.ssim_window; ++y) {
            for (int x = 0; x < w.ssim_window; ++x) {
                const double dy = y - half, dx = x - half;
                const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * w.ssim_sigma * w.ssim_sigma));
                g[static_cast<size_t>(y) * w.ssim_window + x] = v;
                total += v;
            }
        }
        for (int y = 0; y < w.ssim_window; ++y)
            for (int x = 0; x < w.ssim_window; ++x)
                for (int ch = 0; ch < c; ++ch)
                    win.at(y, x, ch) =
                        static_cast<T>(g[static_cast<size_t>(y) * w.ssim_window + x] / total);
    }
    auto kw = constant(win);
    auto mu_t = depthwise_conv2d(y_true, kw, Pad::Valid);
    auto mu_p = depthwise_conv2d(y_pred, kw, Pad::Valid);
    auto var_t = sub(depthwise_conv2d(mul(y_true, y_true), kw, Pad::Valid), mul(mu_t, mu_t));
    auto var_p = sub(depthwise_conv2d(mul(y_pred, y_pred), kw, Pad::Valid), mul(mu_p, mu_p));
    auto cov = sub(depthwise_conv2d(mul(y_true, y_pred), kw, Pad::Valid), mul(mu_t, mu_p));

    auto num = mul(add_const(scale(mul(mu_t, mu_p), 2.0), w.ssim_c1),
                   add_const(scale(cov, 2.0), w.ssim_c2));
    auto den = mul(add_const(add(mul(mu_t, mu_t), mul(mu_p, mu_p)), w.ssim_c1),
                   add_const(add(var_t, var_p), w.ssim_c2));
    auto ssim_map = div_elem(num, den);
    return add_const(scale(mean_all(ssim_map), -1.0), 1.0);
}

// ---------------------------------------------------------------------------
// combination
// ---------------------------------------------------------------------------

template <typename T>
struct LossTermsT {
    ValueT<T> s1, psnr, color, hist, perceptual, ssim;
    ValueT<T> total;

    double s1_v() const { return static_cast<double>(s1->value.data[0]); }
    double psnr_v() const { return static_cast<double>(psnr->value.data[0]); }
    double color_v() const { return static_cast<double>(color->value.data[0]); }
    double hist_v() const { return static_cast<double>(hist->value.data[0]); }
    double perceptual_v() const { return static_cast<double>(perceptual->value.data[0]); }
    double ssim_v() const { return static_cast<double>(ssim->value.data[0]); }
    double total_v() const { return static_cast<double>(total->value.data[0]); }
};

using LossTerms = LossTermsT<float>;

/// L_S1 + a1 L_PSNR + a2 L_Color + a3 L_Hist + a4 L_Per + a5 L_SSIM,
/// with the per-term breakdown exposed for logging.
template <typename T>
inline LossTermsT<T> total_loss(const LossWeights& w, const FeatureExtractorT<T>& extractor,
                                const ValueT<T>& y_true, const ValueT<T>& y_pred) {
    LossTermsT<T> t;
    t.s1 = smooth_l1(y_true, y_pred);
    t.psnr = psnr_loss(y_true, y_pred, w);
    t.color = color_loss(y_true, y_pred);
    t.hist = hist_loss(y_true, y_pred, w);
    t.perceptual = perceptual_loss(extractor, y_true, y_pred, w);
    t.ssim = ssim_loss(y_true, y_pred, w);
    t.total = add(t.s1, add(scale(t.psnr, w.alpha1),
                            add(scale(t.color, w.alpha2),
                                add(scale(t.hist, w.alpha3),
                                    add(scale(t.perceptual, w.alpha4),
                                        scale(t.ssim, w.alpha5))))));
    return t;
}

}  // namespace ltcf
