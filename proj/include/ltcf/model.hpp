#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ltcf/blocks.hpp"
#include "ltcf/checkpoint.hpp"
#include "ltcf/colorspace.hpp"
#include "ltcf/ops.hpp"
#include "ltcf/params.hpp"

namespace ltcf {

enum class Branches { LabOnly, YuvOnly, Both };

inline const char* to_string(Branches b) {
    switch (b) {
        case Branches::LabOnly: return "lab";
        case Branches::YuvOnly: return "yuv";
        default: return "both";
    }
}

inline Branches branches_from_string(const std::string& s) {
    if (s == "lab") return Branches::LabOnly;
    if (s == "yuv") return Branches::YuvOnly;
    if (s == "both") return Branches::Both;
    throw ConfigError("unknown branches value '" + s + "' (want lab|yuv|both)");
}

/// Architecture hyperparameters. The defaults give the full model
/// configuration; the ablation rows toggle use_fbp / use_msef / branches.
struct ModelConfig {
    int base_width = 16;  // luminance-path feature width
    int heads = 4;
    bool use_fbp = true;
    bool use_msef = true;
    Branches branches = Branches::Both;
    bool share_cd_weights = true;  // one denoiser applied to all chroma planes
    int max_attention_tokens = 1024;
    uint64_t seed = 0;

    CdWidths cd_widths{16, 32, 64, 64};
    int fbp_width = 16;
    int msef_reduction = 4;

    void validate() const {
        if (base_width < 1 || heads < 1) throw ConfigError("non-positive width or head count");
        if (base_width % heads != 0) {
            throw ConfigError("base_width " + std::to_string(base_width) +
                              " not divisible by heads " + std::to_string(heads));
        }
        if (cd_widths.w3 % heads != 0) {
            throw ConfigError("cd bottleneck width " + std::to_string(cd_widths.w3) +
                              " not divisible by heads " + std::to_string(heads));
        }
        if (max_attention_tokens < 1) throw ConfigError("max_attention_tokens must be positive");
        if (fbp_width < 1 || msef_reduction < 1) throw ConfigError("bad fbp/msef config");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"base_width", base_width},
                              {"heads", heads},
                              {"use_fbp", use_fbp},
                              {"use_msef", use_msef},
                              {"branches", to_string(branches)},
                              {"share_cd_weights", share_cd_weights},
                              {"max_attention_tokens", max_attention_tokens},
                              {"seed", seed},
                              {"cd_widths", {cd_widths.w0, cd_widths.w1, cd_widths.w2, cd_widths.w3}},
                              {"fbp_width", fbp_width},
                              {"msef_reduction", msef_reduction}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.base_width = j.value("base_width", c.base_width);
        c.heads = j.value("heads", c.heads);
        c.use_fbp = j.value("use_fbp", c.use_fbp);
        c.use_msef = j.value("use_msef", c.use_msef);
        c.branches = branches_from_string(j.value("branches", std::string("both")));
        c.share_cd_weights = j.value("share_cd_weights", c.share_cd_weights);
        c.max_attention_tokens = j.value("max_attention_tokens", c.max_attention_tokens);
        c.seed = j.value("seed", c.seed);
        if (j.contains("cd_widths")) {
            auto w = j.at("cd_widths");
            c.cd_widths = CdWidths{w.at(0), w.at(1), w.at(2), w.at(3)};
        }
        c.fbp_width = j.value("fbp_width", c.fbp_width);
        c.msef_reduction = j.value("msef_reduction", c.msef_reduction);
        return c;
    }

    bool operator==(const ModelConfig& o) const {
        return to_json() == o.to_json();
    }
};

/// The assembled network: up to two color-space branches, each with a
/// luminance path (entry conv -> attention -> FBP), two chroma denoisers,
/// MSEF fusion and a branch conv; plus a cross-branch fusion conv.
template <typename T>
class LtcfNetT {
public:
    struct Branch {
        ColorSpace space;
        std::string prefix;
        ValueT<T> lum_entry;  // 3x3x1xW
        MhsaBlockT<T> lum_mhsa;
        ValueT<T> lum_out;  // 3x3xWx1
        std::optional<FbpBlockT<T>> fbp;
        std::optional<CdBlockT<T>> cd_a, cd_b;  // empty when sharing
        std::optional<MsefBlockT<T>> msef;
        ValueT<T> branch_conv;  // 3x3x3x3
    };

    static LtcfNetT build(const ModelConfig& cfg) {
        cfg.validate();
        LtcfNetT net(cfg);
        auto& reg = net.registry_;

        if (cfg.share_cd_weights) {
            net.shared_cd_ = CdBlockT<T>::build(reg, "cd", cfg.cd_widths, cfg.heads,
                                                cfg.max_attention_tokens);
        }
        if (cfg.branches != Branches::YuvOnly) {
            net.branches_.push_back(net.make_branch("lab", ColorSpace::LAB));
        }
        if (cfg.branches != Branches::LabOnly) {
            net.branches_.push_back(net.make_branch("yuv", ColorSpace::YUV));
        }
        if (net.branches_.size() == 2) {
            net.fusion_conv_ = reg.uniform_init("fusion.conv", {3, 3, 6, 3});
        }
        return net;
    }

    const ModelConfig& config() const { return config_; }
    ParamRegistryT<T>& registry() { return registry_; }
    const ParamRegistryT<T>& registry() const { return registry_; }

    size_t count_params() const { return registry_.total_scalars(); }

    /// End-to-end forward pass: HxWx3 RGB in [0,1] -> HxWx3 RGB in [0,1].
    ValueT<T> forward(const ValueT<T>& rgb) const {
        if (rgb->value.rank() != 3 || rgb->value.dim(2) != 3) {
            throw ShapeError("forward expects HxWx3 RGB, got " + rgb->value.shape_str());
        }
        const int h = rgb->value.dim(0), w = rgb->value.dim(1);
        const auto geom = plan_geometry(h, w);

        auto x = rgb;
        if (geom.ph || geom.pw) x = pad_reflect(x, 0, geom.ph, 0, geom.pw);

        std::vector<ValueT<T>> estimates;
        for (const auto& br : branches_) {
            estimates.push_back(branch_forward(br, x, geom.pool));
        }
        auto out = estimates.size() == 2
                       ? conv2d(concat_lastdim(estimates), fusion_conv_, 1, Pad::Same)
                       : estimates[0];
        out = clamp_st(out, 0.0, 1.0, clamp_margin_);
        if (geom.ph || geom.pw) out = crop(out, 0, 0, h, w);
        return out;
    }

    /// Inference helper: plain tensors in, plain tensors out.
    TensorT<T> enhance(const TensorT<T>& rgb) const { return forward(constant(rgb))->value; }

    void save_checkpoint(const std::string& path) const {
        std::vector<Tensor> storage;
        std::vector<std::pair<std::string, const Tensor*>> entries;
        const auto& params = registry_.params();
        storage.reserve(params.size());
        for (const auto& p : params) storage.push_back(p->value.template cast<float>());
        for (size_t i = 0; i < params.size(); ++i) entries.emplace_back(params[i]->name, &storage[i]);
        save_checkpoint_file(path, config_.to_json().dump(), entries);
    }

    static LtcfNetT load_checkpoint(const std::string& path) {
        auto ck = load_checkpoint_file(path);
        ModelConfig cfg;
        try {
            cfg = ModelConfig::from_json(nlohmann::json::parse(ck.config_json));
        } catch (const nlohmann::json::exception& e) {
            throw CheckpointCorruptError("unparseable config in " + path + ": " + e.what());
        }
        LtcfNetT net = build(cfg);
        net.assign_tensors(ck, path);
        return net;
    }

    /// Loads weights into an existing net; the embedded config must match.
    void load_checkpoint_into(const std::string& path) {
        auto ck = load_checkpoint_file(path);
        ModelConfig cfg;
        try {
            cfg = ModelConfig::from_json(nlohmann::json::parse(ck.config_json));
        } catch (const nlohmann::json::exception& e) {
            throw CheckpointCorruptError("unparseable config in " + path + ": " + e.what());
        }
        if (!(cfg == config_)) {
            throw ConfigError("checkpoint config mismatch: file has branches=" +
                              std::string(to_string(cfg.branches)) +
                              " use_fbp=" + std::to_string(cfg.use_fbp) +
                              ", model wants branches=" +
                              std::string(to_string(config_.branches)) +
                              " use_fbp=" + std::to_string(config_.use_fbp));
        }
        assign_tensors(ck, path);
    }

    const std::vector<Branch>& branches() const { return branches_; }
    std::vector<Branch>& branches() { return branches_; }
    const std::optional<CdBlockT<T>>& shared_cd() const { return shared_cd_; }

    /// Runtime gates: skip blocks that were built, without touching weights.
    /// Lets tests compare flag-disabled forwards against zeroed-block
    /// forwards on the very same parameter set.
    void set_use_msef(bool on) { config_.use_msef = on && msef_built_; }
    void set_use_fbp(bool on) { config_.use_fbp = on && fbp_built_; }

    /// Width of the straight-through band around [0,1]. Zero gives hard-clamp
    /// gradients (the true local derivative, used by the FD checks); training
    /// keeps the default soft margin so saturated pixels continue to learn.
    void set_clamp_margin(double m) { clamp_margin_ = m; }
    double clamp_margin() const { return clamp_margin_; }

private:
    explicit LtcfNetT(const ModelConfig& cfg) : config_(cfg), registry_(cfg.seed) {}

    Branch make_branch(const std::string& prefix, ColorSpace space) {
        auto& reg = registry_;
        const auto& cfg = config_;
        Branch b;
        b.space = space;
        b.prefix = prefix;
        b.lum_entry = reg.uniform_init(prefix + ".lum.entry", {3, 3, 1, cfg.base_width});
        b.lum_mhsa = MhsaBlockT<T>::build(reg, prefix + ".lum.mhsa", cfg.base_width, cfg.heads,
                                          cfg.max_attention_tokens);
        b.lum_out = reg.uniform_init(prefix + ".lum.out", {3, 3, cfg.base_width, 1});
        if (cfg.use_fbp) {
            b.fbp = FbpBlockT<T>::build(reg, prefix + ".fbp", cfg.fbp_width);
            fbp_built_ = true;
        }
        if (!cfg.share_cd_weights) {
            b.cd_a = CdBlockT<T>::build(reg, prefix + ".cd_a", cfg.cd_widths, cfg.heads,
                                        cfg.max_attention_tokens);
            b.cd_b = CdBlockT<T>::build(reg, prefix + ".cd_b", cfg.cd_widths, cfg.heads,
                                        cfg.max_attention_tokens);
        }
        if (cfg.use_msef) {
            b.msef = MsefBlockT<T>::build(reg, prefix + ".msef", 3, cfg.msef_reduction);
            msef_built_ = true;
        }
        b.branch_conv = reg.uniform_init(prefix + ".branch_conv", {3, 3, 3, 3});
        return b;
    }

    struct Geometry {
        int ph = 0, pw = 0;  // bottom/right padding
        int pool = 1;        // luminance attention pooling factor
    };

    /// Pads so the CD pyramid and the attention pool factor both divide the
    /// working size, and picks the smallest power-of-two pool that fits the
    /// token budget.
    Geometry plan_geometry(int h, int w) const {
        int align = 8;
        int hh = 0, ww = 0, pool = 1;
        for (;;) {
            hh = (h + align - 1) / align * align;
            ww = (w + align - 1) / align * align;
            pool = 1;
            while (static_cast<long long>(hh / pool) * (ww / pool) >
                       config_.max_attention_tokens &&
                   pool < std::min(hh, ww)) {
                pool *= 2;
            }
            if (hh % pool == 0 && ww % pool == 0) break;
            align = pool;
        }
        Geometry g;
        g.ph = hh - h;
        g.pw = ww - w;
        g.pool = pool;
        return g;
    }

    ValueT<T> branch_forward(const Branch& br, const ValueT<T>& rgb, int pool) const {
        const bool lab = br.space == ColorSpace::LAB;
        auto planes = lab ? rgb_to_lab_graph(rgb) : rgb_to_yuv_graph(rgb);
        auto norm = normalize_graph(planes, br.space);

        auto lum = slice_lastdim(norm, 0, 1);
        auto chroma_a = slice_lastdim(norm, 1, 2);
        auto chroma_b = slice_lastdim(norm, 2, 3);

        // luminance path: entry conv, token-budgeted attention (residual),
        // collapse back to one plane, then frequency-domain processing
        auto f0 = leaky_relu(conv2d(lum, br.lum_entry, 1, Pad::Same), kLeakySlope);
        ValueT<T> att;
        if (pool > 1) {
            att = upsample_nearest(br.lum_mhsa.forward(avg_pool(f0, pool)), pool);
        } else {
            att = br.lum_mhsa.forward(f0);
        }
        auto f1 = add(f0, att);
        auto lum_feat = conv2d(f1, br.lum_out, 1, Pad::Same);
        auto lum_enh = (config_.use_fbp && br.fbp) ? br.fbp->forward(lum_feat) : lum_feat;

        const CdBlockT<T>& cda = br.cd_a ? *br.cd_a : *shared_cd_;
        const CdBlockT<T>& cdb = br.cd_b ? *br.cd_b : *shared_cd_;
        auto ca = cda.forward(chroma_a);
        auto cb = cdb.forward(chroma_b);

        auto cat = concat_lastdim<T>({lum_enh, ca, cb});
        auto fused = (config_.use_msef && br.msef) ? br.msef->forward(cat) : cat;
        auto out3 = conv2d(fused, br.branch_conv, 1, Pad::Same);

        auto est = denormalize_graph(out3, br.space);
        auto rgb_est = lab ? lab_to_rgb_graph(est, WhitePoint{}, false) : yuv_to_rgb_graph(est);
        return clamp_st(rgb_est, 0.0, 1.0, clamp_margin_);
    }

    void assign_tensors(const CheckpointData& ck, const std::string& path) {
        if (ck.tensors.size() != registry_.params().size()) {
            throw CheckpointShapeError("checkpoint " + path + " carries " +
                                       std::to_string(ck.tensors.size()) + " tensors, model has " +
                                       std::to_string(registry_.params().size()));
        }
        for (const auto& [name, t] : ck.tensors) {
            auto node = registry_.find(name);
            if (!node) throw CheckpointShapeError("unknown parameter '" + name + "' in " + path);
            if (node->value.shape != t.shape) {
                throw CheckpointShapeError("shape mismatch for '" + name + "': model " +
                                           node->value.shape_str() + " vs file " +
                                           Tensor::shape_str(t.shape));
            }
            node->value = t.template cast<T>();
        }
    }

    ModelConfig config_;
    double clamp_margin_ = 0.1;
    bool msef_built_ = false;
    bool fbp_built_ = false;
    ParamRegistryT<T> registry_;
    std::optional<CdBlockT<T>> shared_cd_;
    std::vector<Branch> branches_;
    ValueT<T> fusion_conv_;
};

using LtcfNet = LtcfNetT<float>;

template <typename T>
inline LtcfNetT<T> build(const ModelConfig& cfg) {
    return LtcfNetT<T>::build(cfg);
}

// ---------------------------------------------------------------------------
// complexity accounting
// ---------------------------------------------------------------------------

struct ModuleCost {
    std::string module;
    long long params = 0;
    long long flops = 0;
};

namespace complexity_detail {

inline long long conv_flops(long long oh, long long ow, int kh, int kw, int cin, int cout) {
    return 2LL * oh * ow * kh * kw * cin * cout;
}

inline long long conv_params(int kh, int kw, int cin, int cout) {
    return static_cast<long long>(kh) * kw * cin * cout;
}

inline long long mhsa_flops(long long tokens, int channels, int heads) {
    const int dk = channels / heads;
    long long f = 0;
    f += 2LL * 3LL * tokens * dk * dk * heads;       // Q/K/V projections
    f += 2LL * 2LL * tokens * tokens * dk * heads;   // QK^T and AV
    f += 2LL * tokens * channels * channels;         // output projection
    f += 2LL * tokens * 9LL * channels;              // positional encoder
    return f;
}

inline long long mhsa_params(int channels, int heads) {
    const int dk = channels / heads;
    return 3LL * heads * dk * dk + static_cast<long long>(channels) * channels + 9LL * channels;
}

inline long long fft_flops(long long n) {
    const double lg = std::log2(static_cast<double>(n));
    return static_cast<long long>(5.0 * static_cast<double>(n) * lg);
}

struct CdCost {
    long long params = 0;
    long long flops = 0;  // one application to one HxWx1 plane
};

inline CdCost cd_cost(const CdWidths& ws, int heads, int h, int w) {
    CdCost c;
    const long long h1 = (h + 1) / 2, w1 = (w + 1) / 2;
    const long long h2 = (h1 + 1) / 2, w2 = (w1 + 1) / 2;
    const long long h3 = (h2 + 1) / 2, w3 = (w2 + 1) / 2;
    c.params += conv_params(3, 3, 1, ws.w0);
    c.flops += conv_flops(h, w, 3, 3, 1, ws.w0);
    c.params += conv_params(3, 3, ws.w0, ws.w1);
    c.flops += conv_flops(h1, w1, 3, 3, ws.w0, ws.w1);
    c.params += conv_params(3, 3, ws.w1, ws.w2);
    c.flops += conv_flops(h2, w2, 3, 3, ws.w1, ws.w2);
    c.params += conv_params(3, 3, ws.w2, ws.w3);
    c.flops += conv_flops(h3, w3, 3, 3, ws.w2, ws.w3);
    c.params += mhsa_params(ws.w3, heads);
    c.flops += mhsa_flops(h3 * w3, ws.w3, heads);
    c.params += conv_params(3, 3, ws.w3, ws.w2);
    c.flops += conv_flops(h3 * 2, w3 * 2, 3, 3, ws.w3, ws.w2);
    c.params += conv_params(3, 3, ws.w2, ws.w1);
    c.flops += conv_flops(h2 * 2, w2 * 2, 3, 3, ws.w2, ws.w1);
    c.params += conv_params(3, 3, ws.w1, ws.w0);
    c.flops += conv_flops(h1 * 2, w1 * 2, 3, 3, ws.w1, ws.w0);
    c.params += conv_params(3, 3, ws.w0, ws.w0);
    c.flops += conv_flops(h, w, 3, 3, ws.w0, ws.w0);
    c.params += conv_params(3, 3, ws.w0, 1);
    c.flops += conv_flops(h, w, 3, 3, ws.w0, 1);
    return c;
}

}  // namespace complexity_detail

/// Per-module parameter and FLOP table at the given input size. FLOPs count
/// multiply-accumulates x2 for convs/matmuls/attention plus 5 N log2 N per
/// FFT; params are exact.
inline std::vector<ModuleCost> complexity_table(const ModelConfig& cfg, int h, int w) {
    using namespace complexity_detail;
    cfg.validate();
    std::vector<ModuleCost> rows;

    // mirror the forward-pass geometry
    const int hh = (h + 7) / 8 * 8;
    const int ww = (w + 7) / 8 * 8;
    int pool = 1;
    while (static_cast<long long>(hh / pool) * (ww / pool) > cfg.max_attention_tokens &&
           pool < std::min(hh, ww)) {
        pool *= 2;
    }
    const long long hw = static_cast<long long>(hh) * ww;
    const long long tokens = static_cast<long long>(hh / pool) * (ww / pool);

    const int nbranches = cfg.branches == Branches::Both ? 2 : 1;
    const char* names[2] = {cfg.branches == Branches::YuvOnly ? "yuv" : "lab", "yuv"};

    if (cfg.share_cd_weights) {
        const auto cd = cd_cost(cfg.cd_widths, cfg.heads, hh, ww);
        ModuleCost row{"cd(shared)", cd.params, cd.flops * 2 * nbranches};
        rows.push_back(row);
    }

    for (int b = 0; b < nbranches; ++b) {
        const std::string p = names[b];
        ModuleCost lum{p + ".lum", 0, 0};
        lum.params += conv_params(3, 3, 1, cfg.base_width);
        lum.flops += conv_flops(hh, ww, 3, 3, 1, cfg.base_width);
        lum.params += mhsa_params(cfg.base_width, cfg.heads);
        lum.flops += mhsa_flops(tokens, cfg.base_width, cfg.heads);
        lum.params += conv_params(3, 3, cfg.base_width, 1);
        lum.flops += conv_flops(hh, ww, 3, 3, cfg.base_width, 1);
        rows.push_back(lum);

        if (cfg.use_fbp) {
            ModuleCost fbp{p + ".fbp", 0, 0};
            for (int part = 0; part < 2; ++part) {
                fbp.params += conv_params(3, 3, 1, cfg.fbp_width);
                fbp.flops += conv_flops(hh, ww, 3, 3, 1, cfg.fbp_width);
                fbp.params += conv_params(3, 3, cfg.fbp_width, cfg.fbp_width);
                fbp.flops += conv_flops(hh, ww, 3, 3, cfg.fbp_width, cfg.fbp_width);
                fbp.params += conv_params(3, 3, cfg.fbp_width, 1);
                fbp.flops += conv_flops(hh, ww, 3, 3, cfg.fbp_width, 1);
            }
            fbp.flops += 2 * fft_flops(hw);  // forward + inverse transform
            rows.push_back(fbp);
        }

        if (!cfg.share_cd_weights) {
            const auto cd = cd_cost(cfg.cd_widths, cfg.heads, hh, ww);
            rows.push_back(ModuleCost{p + ".cd_a", cd.params, cd.flops});
            rows.push_back(ModuleCost{p + ".cd_b", cd.params, cd.flops});
        }

        if (cfg.use_msef) {
            const int cr = std::max(1, 3 / cfg.msef_reduction);
            ModuleCost msef{p + ".msef", 0, 0};
            msef.params = 3LL * cr * 2 + 3 + 3;  // W1, W2, LN gain/bias
            msef.flops = 2LL * 3 * cr + 2LL * cr * 3;
            rows.push_back(msef);
        }

        rows.push_back(ModuleCost{p + ".branch_conv", conv_params(3, 3, 3, 3),
                                  conv_flops(hh, ww, 3, 3, 3, 3)});
    }

    if (nbranches == 2) {
        rows.push_back(ModuleCost{"fusion", conv_params(3, 3, 6, 3),
                                  conv_flops(hh, ww, 3, 3, 6, 3)});
    }
    return rows;
}

inline long long estimate_flops(const ModelConfig& cfg, int h, int w) {
    long long total = 0;
    for (const auto& row : complexity_table(cfg, h, w)) total += row.flops;
    return total;
}

inline long long estimate_params(const ModelConfig& cfg) {
    long long total = 0;
    for (const auto& row : complexity_table(cfg, 64, 64)) total += row.params;
    return total;
}

}  // namespace ltcf
