#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ltcf/image_io.hpp"
#include "ltcf/random.hpp"
#include "ltcf/tensor.hpp"

namespace ltcf {

struct ImagePair {
    std::string name;  // shared basename
    Tensor low;        // HxWx3 in [0,1]
    Tensor high;
};

struct PairedDataset {
    std::vector<ImagePair> pairs;
    std::string split = "train";

    size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

/// Synthetic degradation: low = clamp(normalum^gamma + noise, 0, 1).
struct DegradationConfig {
    double gamma_lo = 2.0;
    double gamma_hi = 5.0;
    double sigma_lo = 0.0;
    double sigma_hi = 0.02;
    uint64_t seed = 0;

    void validate() const {
        if (gamma_lo < 1.0 || gamma_hi < gamma_lo) throw ConfigError("gamma range wants hi >= lo >= 1");
        if (sigma_lo < 0.0 || sigma_hi < sigma_lo) throw ConfigError("sigma range wants hi >= lo >= 0");
    }
};

namespace data_detail {

inline bool is_image_file(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace data_detail

/// Loads matched low/high pairs from two directories with identical
/// basenames, sorted by filename. Per-file problems are gathered into one
/// structured error message.
inline PairedDataset load_pairs(const std::string& low_dir, const std::string& high_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(low_dir)) throw IngestError("low directory missing: " + low_dir);
    if (!fs::is_directory(high_dir)) throw IngestError("high directory missing: " + high_dir);

    std::map<std::string, fs::path> lows, highs;
    for (const auto& e : fs::directory_iterator(low_dir)) {
        if (e.is_regular_file() && data_detail::is_image_file(e.path())) {
            lows[e.path().filename().string()] = e.path();
        }
    }
    for (const auto& e : fs::directory_iterator(high_dir)) {
        if (e.is_regular_file() && data_detail::is_image_file(e.path())) {
            highs[e.path().filename().string()] = e.path();
        }
    }
    if (lows.empty()) throw IngestError("empty dataset: no images under " + low_dir);

    PairedDataset ds;
    std::vector<std::string> problems;
    for (const auto& [name, lp] : lows) {
        auto it = highs.find(name);
        if (it == highs.end()) {
            problems.push_back(name + ": no counterpart in " + high_dir);
            continue;
        }
        try {
            ImagePair pair;
            pair.name = name;
            pair.low = read_image(lp.string());
            pair.high = read_image(it->second.string());
            if (pair.low.shape != pair.high.shape) {
                problems.push_back(name + ": dimension mismatch " + pair.low.shape_str() +
                                   " vs " + pair.high.shape_str());
                continue;
            }
            ds.pairs.push_back(std::move(pair));
        } catch (const Error& e) {
            problems.push_back(name + ": " + e.what());
        }
    }
    for (const auto& [name, hp] : highs) {
        if (!lows.count(name)) problems.push_back(name + ": no counterpart in " + low_dir);
    }
    if (!problems.empty()) {
        std::string msg = std::to_string(problems.size()) + " bad pair(s):";
        for (const auto& p : problems) msg += "\n  " + p;
        throw IngestError(msg);
    }
    if (ds.pairs.empty()) throw IngestError("empty dataset after pairing");
    return ds;  // std::map iteration already gives filename order
}

/// low = clamp(normal^gamma + gaussian(sigma), 0, 1) with gamma and sigma
/// drawn from the configured ranges.
inline ImagePair synthesize_pair(const Tensor& normal_img, const DegradationConfig& cfg,
                                 Rng& rng, const std::string& name = "synthetic") {
    cfg.validate();
    const double gamma = rng.uniform(cfg.gamma_lo, cfg.gamma_hi);
    const double sigma = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
    ImagePair pair;
    pair.name = name;
    pair.high = normal_img;
    pair.low = Tensor(normal_img.shape);
    for (size_t i = 0; i < normal_img.numel(); ++i) {
        double v = std::pow(static_cast<double>(normal_img.data[i]), gamma);
        if (sigma > 0.0) v += rng.normal() * sigma;
        pair.low.data[i] = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
    }
    return pair;
}

/// Procedural well-lit test images: smooth color gradients plus soft blobs,
/// enough structure to make enhancement measurable.
inline Tensor synthesize_normal_image(int h, int w, Rng& rng) {
    Tensor img({h, w, 3});
    double gx[3], gy[3], base[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.35, 0.75);
        gx[c] = rng.uniform(-0.25, 0.25);
        gy[c] = rng.uniform(-0.25, 0.25);
    }
    struct Blob {
        double cy, cx, r, amp[3];
    };
    std::vector<Blob> blobs(4);
    for (auto& b : blobs) {
        b.cy = rng.uniform(0.0, 1.0);
        b.cx = rng.uniform(0.0, 1.0);
        b.r = rng.uniform(0.08, 0.3);
        for (int c = 0; c < 3; ++c) b.amp[c] = rng.uniform(-0.3, 0.3);
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fy = static_cast<double>(y) / h, fx = static_cast<double>(x) / w;
            for (int c = 0; c < 3; ++c) {
                double v = base[c] + gx[c] * (fx - 0.5) + gy[c] * (fy - 0.5);
                for (const auto& b : blobs) {
                    const double d2 = (fy - b.cy) * (fy - b.cy) + (fx - b.cx) * (fx - b.cx);
                    v += b.amp[c] * std::exp(-d2 / (2.0 * b.r * b.r));
                }
                img.at(y, x, c) = static_cast<float>(std::min(std::max(v, 0.05), 0.98));
            }
        }
    }
    return img;
}

/// Builds an n-pair synthetic dataset of the given resolution.
inline PairedDataset synthesize_dataset(int n, int h, int w, const DegradationConfig& cfg) {
    if (n < 1) throw ConfigError("synthetic dataset needs n >= 1");
    Rng rng(cfg.seed);
    PairedDataset ds;
    for (int i = 0; i < n; ++i) {
        auto normal = synthesize_normal_image(h, w, rng);
        ds.pairs.push_back(synthesize_pair(normal, cfg, rng, "synthetic_" + std::to_string(i)));
    }
    return ds;
}

/// Identical crop window applied to both images of the pair.
inline ImagePair random_crop_pair(const ImagePair& pair, int patch, Rng& rng) {
    const int h = pair.low.dim(0), w = pair.low.dim(1);
    if (patch > std::min(h, w)) {
        throw ShapeError("crop patch " + std::to_string(patch) + " exceeds image " +
                         std::to_string(h) + "x" + std::to_string(w));
    }
    if (patch == h && patch == w) return pair;
    const int y0 = static_cast<int>(rng.below(static_cast<uint32_t>(h - patch + 1)));
    const int x0 = static_cast<int>(rng.below(static_cast<uint32_t>(w - patch + 1)));
    ImagePair out;
    out.name = pair.name;
    out.low = Tensor({patch, patch, 3});
    out.high = Tensor({patch, patch, 3});
    for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
            for (int c = 0; c < 3; ++c) {
                out.low.at(y, x, c) = pair.low.at(y0 + y, x0 + x, c);
                out.high.at(y, x, c) = pair.high.at(y0 + y, x0 + x, c);
            }
        }
    }
    return out;
}

/// Deterministic train/test split keyed on a stable filename hash, so reruns
/// agree without a manifest file.
inline std::pair<PairedDataset, PairedDataset> split_dataset(const PairedDataset& ds,
                                                             double test_fraction) {
    if (test_fraction < 0.0 || test_fraction >= 1.0) {
        throw ConfigError("test fraction must be in [0, 1)");
    }
    PairedDataset train, test;
    train.split = "train";
    test.split = "test";
    const auto threshold = static_cast<uint64_t>(test_fraction * 10000.0);
    for (const auto& p : ds.pairs) {
        if (data_detail::fnv1a(p.name) % 10000 < threshold) {
            test.pairs.push_back(p);
        } else {
            train.pairs.push_back(p);
        }
    }
    if (train.empty() && !test.empty()) std::swap(train, test);
    return {std::move(train), std::move(test)};
}

}  // namespace ltcf
