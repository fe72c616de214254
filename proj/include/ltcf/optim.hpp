#pragma once

#include <cmath>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "ltcf/data.hpp"
#include "ltcf/losses.hpp"
#include "ltcf/model.hpp"

namespace ltcf {

/// Adam moments, one slot per parameter tensor.
template <typename T>
struct AdamStateT {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long long t = 0;
    std::vector<TensorT<T>> m, v;

    static AdamStateT init(const std::vector<ValueT<T>>& params) {
        AdamStateT st;
        st.m.reserve(params.size());
        st.v.reserve(params.size());
        for (const auto& p : params) {
            st.m.emplace_back(p->value.shape);
            st.v.emplace_back(p->value.shape);
        }
        return st;
    }
};

using AdamState = AdamStateT<float>;

/// Bias-corrected Adam update. Applies a global-norm gradient clip first
/// (NaN guard), then zeroes the gradients. Returns true when the clip fired.
template <typename T>
inline bool adam_step(AdamStateT<T>& st, const std::vector<ValueT<T>>& params, double lr,
                      double clip_norm = 5.0) {
    if (st.m.size() != params.size()) {
        throw UsageError("adam state does not match the parameter list");
    }
    double norm_sq = 0.0;
    for (const auto& p : params) {
        if (p->grad.numel() != p->value.numel()) {
            throw UsageError("missing gradient for parameter '" + p->name +
                             "'; run backward() first");
        }
        for (T g : p->grad.data) norm_sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(norm_sq);
    const bool clipped = clip_norm > 0.0 && norm > clip_norm;
    const double gscale = clipped ? clip_norm / norm : 1.0;

    st.t += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = st.m[i];
        auto& v = st.v[i];
        for (size_t j = 0; j < p->value.numel(); ++j) {
            const double g = static_cast<double>(p->grad.data[j]) * gscale;
            const double mj = st.beta1 * static_cast<double>(m.data[j]) + (1.0 - st.beta1) * g;
            const double vj = st.beta2 * static_cast<double>(v.data[j]) + (1.0 - st.beta2) * g * g;
            m.data[j] = static_cast<T>(mj);
            v.data[j] = static_cast<T>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            p->value.data[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + st.epsilon));
        }
        p->zero_grad();
    }
    return clipped;
}

/// Cosine annealing from lr_initial down to lr_final, with an optional
/// linear warmup.
struct ScheduleConfig {
    double lr_initial = 2e-4;
    double lr_final = 1e-6;
    int total_epochs = 100;
    int warmup_epochs = 0;

    void validate() const {
        if (!(lr_initial > lr_final && lr_final > 0.0)) {
            throw ConfigError("schedule wants lr_initial > lr_final > 0");
        }
        if (total_epochs < 1 || warmup_epochs < 0 || warmup_epochs >= total_epochs) {
            throw ConfigError("bad schedule epochs");
        }
    }
};

inline double cosine_lr(const ScheduleConfig& s, int epoch) {
    s.validate();
    if (epoch < 0 || epoch > s.total_epochs) {
        std::cerr << "[ltcf] warning: epoch " << epoch << " outside [0, " << s.total_epochs
                  << "], clamping\n";
        epoch = std::min(std::max(epoch, 0), s.total_epochs);
    }
    if (s.warmup_epochs > 0 && epoch < s.warmup_epochs) {
        return s.lr_initial * static_cast<double>(epoch + 1) / (s.warmup_epochs + 1);
    }
    const double span = static_cast<double>(s.total_epochs - s.warmup_epochs);
    const double x = static_cast<double>(epoch - s.warmup_epochs) / span;
    return s.lr_final + 0.5 * (s.lr_initial - s.lr_final) * (1.0 + std::cos(M_PI * x));
}

// ---------------------------------------------------------------------------
// training loop
// ---------------------------------------------------------------------------

struct TrainConfig {
    int epochs = 100;
    int batch_size = 8;
    int patch = 64;
    uint64_t seed = 0;
    double clip_norm = 5.0;
    std::string checkpoint_dir;   // empty: no periodic checkpoints
    int checkpoint_every = 0;     // epochs; 0: only the implicit final state
};

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    int steps = 0;
    bool clipped = false;
    double total = 0.0, s1 = 0.0, psnr = 0.0, color = 0.0, hist = 0.0, perceptual = 0.0,
           ssim = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::vector<double> step_totals;  // per-step batch-mean total loss
    int total_steps = 0;
};

namespace train_detail {

template <typename T>
inline void throw_if_non_finite(const LossTermsT<T>& terms,
                                const std::vector<ValueT<T>>& params, int epoch) {
    const std::pair<const char*, double> checks[] = {
        {"total", terms.total_v()},       {"smooth_l1", terms.s1_v()},
        {"psnr", terms.psnr_v()},         {"color", terms.color_v()},
        {"hist", terms.hist_v()},         {"perceptual", terms.perceptual_v()},
        {"ssim", terms.ssim_v()},
    };
    for (const auto& [name, v] : checks) {
        if (!std::isfinite(v)) {
            // name the first offending parameter too, if any
            for (const auto& p : params) {
                if (!p->value.all_finite()) {
                    throw NumericError("non-finite loss term '" + std::string(name) +
                                       "' at epoch " + std::to_string(epoch) +
                                       "; first non-finite tensor: parameter '" + p->name + "'");
                }
            }
            throw NumericError("non-finite loss term '" + std::string(name) + "' at epoch " +
                               std::to_string(epoch) + "; first non-finite tensor: loss '" +
                               name + "'");
        }
    }
}

}  // namespace train_detail

/// Full-dataset training with per-epoch shuffling, random crops, batched
/// gradient accumulation, and cosine-annealed Adam. Deterministic for a
/// fixed seed (single-threaded, seeded shuffling and cropping).
template <typename T>
inline TrainHistory train(LtcfNetT<T>& net, const PairedDataset& data, const LossWeights& lw,
                          const FeatureExtractorT<T>& extractor, ScheduleConfig sched,
                          const TrainConfig& tc,
                          const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (data.empty()) throw IngestError("training dataset is empty");
    if (tc.epochs < 0) throw ConfigError("negative epoch count");
    if (tc.epochs == 0) return {};
    if (sched.total_epochs < tc.epochs) sched.total_epochs = tc.epochs;
    sched.validate();

    auto& params = net.registry().params();
    auto adam = AdamStateT<T>::init(params);
    Rng rng(tc.seed ^ 0x5eedf00dULL);

    TrainHistory history;
    const int n = static_cast<int>(data.size());
    const int batch = std::max(1, std::min(tc.batch_size, n));

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const double lr = cosine_lr(sched, epoch);
        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;

        std::vector<int> order(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
        for (int i = n - 1; i > 0; --i) {
            std::swap(order[static_cast<size_t>(i)],
                      order[rng.below(static_cast<uint32_t>(i + 1))]);
        }

        for (int start = 0; start < n; start += batch) {
            const int count = std::min(batch, n - start);
            net.registry().zero_grads();
            double btotal = 0, bs1 = 0, bpsnr = 0, bcolor = 0, bhist = 0, bper = 0, bssim = 0;
            for (int k = 0; k < count; ++k) {
                const auto& pair = data.pairs[static_cast<size_t>(order[static_cast<size_t>(start + k)])];
                const int patch = std::min({tc.patch, pair.low.dim(0), pair.low.dim(1)});
                const auto crop = random_crop_pair(pair, patch, rng);

                auto pred = net.forward(constant(crop.low.template cast<T>()));
                auto truth = constant(crop.high.template cast<T>());
                auto terms = total_loss(lw, extractor, truth, pred);
                train_detail::throw_if_non_finite(terms, params, epoch);

                backward(scale(terms.total, 1.0 / count));
                btotal += terms.total_v();
                bs1 += terms.s1_v();
                bpsnr += terms.psnr_v();
                bcolor += terms.color_v();
                bhist += terms.hist_v();
                bper += terms.perceptual_v();
                bssim += terms.ssim_v();
            }
            stats.clipped |= adam_step(adam, params, lr, tc.clip_norm);
            stats.steps += 1;
            history.total_steps += 1;
            history.step_totals.push_back(btotal / count);
            stats.total += btotal / count;
            stats.s1 += bs1 / count;
            stats.psnr += bpsnr / count;
            stats.color += bcolor / count;
            stats.hist += bhist / count;
            stats.perceptual += bper / count;
            stats.ssim += bssim / count;
        }

        const double inv = 1.0 / std::max(1, stats.steps);
        stats.total *= inv;
        stats.s1 *= inv;
        stats.psnr *= inv;
        stats.color *= inv;
        stats.hist *= inv;
        stats.perceptual *= inv;
        stats.ssim *= inv;
        history.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);

        if (!tc.checkpoint_dir.empty() && tc.checkpoint_every > 0 &&
            (epoch + 1) % tc.checkpoint_every == 0) {
            net.save_checkpoint(tc.checkpoint_dir + "/epoch_" + std::to_string(epoch + 1) +
                                ".ckpt");
        }
    }
    return history;
}

// ---------------------------------------------------------------------------
// evaluation metrics (not losses): PSNR in dB and SSIM similarity
// ---------------------------------------------------------------------------

inline double psnr_metric(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "psnr_metric");
    double mse = 0.0;
    for (size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.numel());
    mse = std::max(mse, 1e-8);
    return -10.0 * std::log10(mse);
}

inline double ssim_metric(const Tensor& a, const Tensor& b, const LossWeights& w = {}) {
    auto loss = ssim_loss(constant(a), constant(b), w);
    return 1.0 - static_cast<double>(loss->value.data[0]);
}

}  // namespace ltcf
