// ltcf: batch CLI for training, enhancement, evaluation and inspection of the
// dual color-space low-light enhancement network.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ltcf/data.hpp"
#include "ltcf/image_io.hpp"
#include "ltcf/losses.hpp"
#include "ltcf/model.hpp"
#include "ltcf/optim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// exit code classes
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIngest = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitIo = 5;

/// Merged view of every tunable: model, losses, schedule, degradation,
/// dataset paths, output dir. File values load first, flags override.
struct RunConfig {
    ltcf::ModelConfig model;
    ltcf::LossWeights loss;
    ltcf::ScheduleConfig schedule;
    ltcf::DegradationConfig degradation;

    int epochs = 100;
    int lr_horizon = 0;  // cosine horizon in epochs; 0 = same as epochs
    int batch = 8;
    int patch = 64;
    int ckpt_every = 0;
    double test_frac = 0.1;

    std::string data_root;
    int synthetic = 0;
    int synth_size = 64;
    bool srgb_decode = false;

    std::string extractor_file;  // perceptual extractor FILE mode
    std::string out_dir;

    json to_json() const {
        json j;
        j["model"] = model.to_json();
        j["loss"] = {{"alphas", {loss.alpha1, loss.alpha2, loss.alpha3, loss.alpha4, loss.alpha5}},
                     {"psnr_cap", loss.psnr_cap},
                     {"hist_bins", loss.hist_bins},
                     {"hist_bandwidth", loss.hist_bandwidth},
                     {"ssim_window", loss.ssim_window},
                     {"ssim_sigma", loss.ssim_sigma},
                     {"perceptual_layer_weights", loss.perceptual_layer_weights}};
        j["schedule"] = {{"lr_initial", schedule.lr_initial},
                         {"lr_final", schedule.lr_final},
                         {"warmup_epochs", schedule.warmup_epochs},
                         {"lr_horizon", lr_horizon}};
        j["degradation"] = {{"gamma", {degradation.gamma_lo, degradation.gamma_hi}},
                            {"sigma", {degradation.sigma_lo, degradation.sigma_hi}}};
        j["train"] = {{"epochs", epochs},
                      {"batch", batch},
                      {"patch", patch},
                      {"ckpt_every", ckpt_every},
                      {"test_frac", test_frac}};
        j["data"] = {{"root", data_root},
                     {"synthetic", synthetic},
                     {"synth_size", synth_size},
                     {"srgb_decode", srgb_decode}};
        j["extractor_file"] = extractor_file;
        j["out"] = out_dir;
        return j;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ltcf::ConfigError("cannot read config file: " + path);
        json j;
        try {
            is >> j;
        } catch (const json::exception& e) {
            throw ltcf::ConfigError("malformed config file " + path + ": " + e.what());
        }
        RunConfig c;
        if (j.contains("model")) c.model = ltcf::ModelConfig::from_json(j["model"]);
        if (j.contains("loss")) {
            const auto& l = j["loss"];
            if (l.contains("alphas")) {
                const auto& a = l["alphas"];
                if (a.size() != 5) throw ltcf::ConfigError("loss.alphas wants 5 values");
                c.loss.alpha1 = a[0];
                c.loss.alpha2 = a[1];
                c.loss.alpha3 = a[2];
                c.loss.alpha4 = a[3];
                c.loss.alpha5 = a[4];
            }
            c.loss.psnr_cap = l.value("psnr_cap", c.loss.psnr_cap);
            c.loss.hist_bins = l.value("hist_bins", c.loss.hist_bins);
            c.loss.hist_bandwidth = l.value("hist_bandwidth", c.loss.hist_bandwidth);
            c.loss.ssim_window = l.value("ssim_window", c.loss.ssim_window);
            c.loss.ssim_sigma = l.value("ssim_sigma", c.loss.ssim_sigma);
            if (l.contains("perceptual_layer_weights")) {
                c.loss.perceptual_layer_weights =
                    l["perceptual_layer_weights"].get<std::vector<double>>();
            }
        }
        if (j.contains("schedule")) {
            const auto& s = j["schedule"];
            c.schedule.lr_initial = s.value("lr_initial", c.schedule.lr_initial);
            c.schedule.lr_final = s.value("lr_final", c.schedule.lr_final);
            c.schedule.warmup_epochs = s.value("warmup_epochs", c.schedule.warmup_epochs);
            c.lr_horizon = s.value("lr_horizon", c.lr_horizon);
        }
        if (j.contains("degradation")) {
            const auto& d = j["degradation"];
            if (d.contains("gamma")) {
                c.degradation.gamma_lo = d["gamma"][0];
                c.degradation.gamma_hi = d["gamma"][1];
            }
            if (d.contains("sigma")) {
                c.degradation.sigma_lo = d["sigma"][0];
                c.degradation.sigma_hi = d["sigma"][1];
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            c.epochs = t.value("epochs", c.epochs);
            c.batch = t.value("batch", c.batch);
            c.patch = t.value("patch", c.patch);
            c.ckpt_every = t.value("ckpt_every", c.ckpt_every);
            c.test_frac = t.value("test_frac", c.test_frac);
        }
        if (j.contains("data")) {
            const auto& d = j["data"];
            c.data_root = d.value("root", c.data_root);
            c.synthetic = d.value("synthetic", c.synthetic);
            c.synth_size = d.value("synth_size", c.synth_size);
            c.srgb_decode = d.value("srgb_decode", c.srgb_decode);
        }
        c.extractor_file = j.value("extractor_file", c.extractor_file);
        c.out_dir = j.value("out", c.out_dir);
        return c;
    }
};

std::string default_out_root() {
    if (const char* env = std::getenv("LTCF_OUT_ROOT")) return env;
    return "ltcf_out";
}

void ensure_out_dir(RunConfig& cfg) {
    if (cfg.out_dir.empty()) cfg.out_dir = default_out_root();
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw ltcf::IoError("cannot create output dir " + cfg.out_dir + ": " + ec.message());
}

void echo_resolved_config(const RunConfig& cfg) {
    const auto path = fs::path(cfg.out_dir) / "config_resolved.json";
    std::ofstream os(path);
    if (!os) throw ltcf::IoError("cannot write " + path.string());
    os << cfg.to_json().dump(2) << "\n";
    std::cout << "resolved config -> " << path.string() << "\n";
}

std::vector<double> parse_alphas(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (...) {
            throw ltcf::ConfigError("bad --alphas entry '" + tok + "'");
        }
    }
    if (out.size() != 5) throw ltcf::ConfigError("--alphas wants exactly 5 comma-separated values");
    return out;
}

ltcf::FeatureExtractor make_extractor(const RunConfig& cfg) {
    if (!cfg.extractor_file.empty()) {
        return ltcf::FeatureExtractor::from_file(cfg.extractor_file);
    }
    return ltcf::FeatureExtractor::seeded_random(cfg.model.seed ^ 0x9e3779b9ULL);
}

ltcf::PairedDataset load_dataset(const RunConfig& cfg) {
    if (cfg.synthetic > 0) {
        auto dc = cfg.degradation;
        if (dc.seed == 0) dc.seed = cfg.model.seed + 1;
        return ltcf::synthesize_dataset(cfg.synthetic, cfg.synth_size, cfg.synth_size, dc);
    }
    if (cfg.data_root.empty()) {
        throw ltcf::ConfigError(
            "no dataset: pass --data <root> (with low/ and high/) or --synthetic N");
    }
    auto ds = ltcf::load_pairs((fs::path(cfg.data_root) / "low").string(),
                               (fs::path(cfg.data_root) / "high").string());
    if (cfg.srgb_decode) {
        for (auto& p : ds.pairs) {
            ltcf::srgb_decode_inplace(p.low);
            ltcf::srgb_decode_inplace(p.high);
        }
    }
    return ds;
}

void write_metrics_csv(const std::string& path, const std::vector<std::string>& names,
                       const std::vector<double>& psnr, const std::vector<double>& ssim) {
    std::ofstream os(path);
    if (!os) throw ltcf::IoError("cannot write metrics report: " + path);
    os << "name,psnr_db,ssim\n";
    double psum = 0, ssum = 0;
    for (size_t i = 0; i < names.size(); ++i) {
        os << names[i] << "," << std::setprecision(10) << psnr[i] << "," << ssim[i] << "\n";
        psum += psnr[i];
        ssum += ssim[i];
    }
    const double n = static_cast<double>(names.size());
    os << "MEAN," << std::setprecision(10) << psum / n << "," << ssum / n << "\n";
}

/// Evaluates a net over a paired dataset; returns (mean psnr, mean ssim).
std::pair<double, double> run_eval(const ltcf::LtcfNet& net, const ltcf::PairedDataset& ds,
                                   const RunConfig& cfg, const std::string& csv_path) {
    std::vector<std::string> names;
    std::vector<double> psnrs, ssims;
    for (const auto& pair : ds.pairs) {
        auto enhanced = net.enhance(pair.low);
        names.push_back(pair.name);
        psnrs.push_back(ltcf::psnr_metric(pair.high, enhanced));
        ssims.push_back(ltcf::ssim_metric(pair.high, enhanced, cfg.loss));
    }
    if (!csv_path.empty()) write_metrics_csv(csv_path, names, psnrs, ssims);
    double psum = 0, ssum = 0;
    for (size_t i = 0; i < names.size(); ++i) {
        std::cout << "  " << names[i] << "  psnr " << std::fixed << std::setprecision(2)
                  << psnrs[i] << " dB  ssim " << std::setprecision(4) << ssims[i] << "\n";
        psum += psnrs[i];
        ssum += ssims[i];
    }
    const double n = static_cast<double>(names.size());
    std::cout << "  mean  psnr " << std::setprecision(2) << psum / n << " dB  ssim "
              << std::setprecision(4) << ssum / n << "\n"
              << std::defaultfloat;
    return {psum / n, ssum / n};
}

/// Tiled forward with overlap blending for inputs beyond the token budget.
/// Documented approximation: tiles see no global context.
ltcf::Tensor enhance_tiled(const ltcf::LtcfNet& net, const ltcf::Tensor& img, int tile,
                           int overlap) {
    const int h = img.dim(0), w = img.dim(1);
    if (tile <= 0 || (h <= tile && w <= tile)) return net.enhance(img);
    const int stride = std::max(1, tile - overlap);
    ltcf::Tensor acc({h, w, 3});
    ltcf::Tensor weight({h, w, 3});
    for (int y0 = 0;; y0 += stride) {
        y0 = std::min(y0, std::max(0, h - tile));
        for (int x0 = 0;; x0 += stride) {
            x0 = std::min(x0, std::max(0, w - tile));
            const int ty = std::min(tile, h - y0);
            const int tx = std::min(tile, w - x0);
            ltcf::Tensor patch({ty, tx, 3});
            for (int y = 0; y < ty; ++y)
                for (int x = 0; x < tx; ++x)
                    for (int c = 0; c < 3; ++c) patch.at(y, x, c) = img.at(y0 + y, x0 + x, c);
            auto out = net.enhance(patch);
            for (int y = 0; y < ty; ++y) {
                for (int x = 0; x < tx; ++x) {
                    // linear feather toward tile borders inside overlaps
                    const double wy = std::min(
                        {1.0, (y + 1.0) / (overlap + 1.0), (ty - y) / (overlap + 1.0)});
                    const double wx = std::min(
                        {1.0, (x + 1.0) / (overlap + 1.0), (tx - x) / (overlap + 1.0)});
                    const float ww = static_cast<float>(wy * wx);
                    for (int c = 0; c < 3; ++c) {
                        acc.at(y0 + y, x0 + x, c) += out.at(y, x, c) * ww;
                        weight.at(y0 + y, x0 + x, c) += ww;
                    }
                }
            }
            if (x0 + tx >= w) break;
        }
        if (y0 + std::min(tile, h - y0) >= h) break;
    }
    for (size_t i = 0; i < acc.numel(); ++i) acc.data[i] /= std::max(weight.data[i], 1e-8f);
    return acc;
}

ltcf::Tensor side_by_side(const ltcf::Tensor& a, const ltcf::Tensor& b) {
    const int h = a.dim(0), wa = a.dim(1), wb = b.dim(1), gap = 4;
    ltcf::Tensor grid({h, wa + gap + wb, 3});
    grid.fill(1.f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < wa; ++x)
            for (int c = 0; c < 3; ++c) grid.at(y, x, c) = a.at(y, x, c);
        for (int x = 0; x < wb; ++x)
            for (int c = 0; c < 3; ++c) grid.at(y, wa + gap + x, c) = b.at(y, x, c);
    }
    return grid;
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_train(RunConfig cfg) {
    ensure_out_dir(cfg);
    echo_resolved_config(cfg);

    auto data = load_dataset(cfg);
    ltcf::PairedDataset train_set = data, test_set;
    if (cfg.synthetic == 0 && cfg.test_frac > 0.0) {
        auto [tr, te] = ltcf::split_dataset(data, cfg.test_frac);
        train_set = std::move(tr);
        test_set = std::move(te);
    }
    if (test_set.empty()) test_set = train_set;  // overfit runs evaluate in-sample

    auto net = ltcf::LtcfNet::build(cfg.model);
    auto extractor = make_extractor(cfg);
    std::cout << "training on " << train_set.size() << " pair(s), " << cfg.epochs
              << " epoch(s), params " << net.count_params() << "\n";

    const auto history_path = fs::path(cfg.out_dir) / "history.csv";
    std::ofstream hist(history_path);
    if (!hist) throw ltcf::IoError("cannot write " + history_path.string());
    hist << "epoch,lr,total,s1,psnr,color,hist,perceptual,ssim\n";

    ltcf::TrainConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch;
    tc.patch = cfg.patch;
    tc.seed = cfg.model.seed;
    tc.checkpoint_dir = cfg.out_dir;
    tc.checkpoint_every = cfg.ckpt_every;

    auto sched = cfg.schedule;
    sched.total_epochs = cfg.lr_horizon > 0 ? cfg.lr_horizon : cfg.epochs;

    ltcf::train(net, train_set, cfg.loss, extractor, sched, tc,
                [&](const ltcf::EpochStats& e) {
                    hist << e.epoch << "," << std::setprecision(10) << e.lr << "," << e.total
                         << "," << e.s1 << "," << e.psnr << "," << e.color << "," << e.hist
                         << "," << e.perceptual << "," << e.ssim << "\n";
                    hist.flush();
                    if (e.epoch % 10 == 0 || e.epoch == cfg.epochs - 1) {
                        std::cout << "epoch " << std::setw(4) << e.epoch << "  lr "
                                  << std::scientific << std::setprecision(2) << e.lr
                                  << std::defaultfloat << "  total " << std::setprecision(5)
                                  << e.total << (e.clipped ? "  [clipped]" : "") << "\n";
                    }
                });

    const auto ckpt_path = fs::path(cfg.out_dir) / "model.ckpt";
    net.save_checkpoint(ckpt_path.string());
    std::cout << "checkpoint -> " << ckpt_path.string() << "\n";

    std::cout << "final metrics on the " << test_set.split << " split (" << test_set.size()
              << " pair(s)):\n";
    run_eval(net, test_set, cfg, (fs::path(cfg.out_dir) / "metrics.csv").string());
    return kExitOk;
}

int cmd_enhance(RunConfig cfg, const std::string& checkpoint, const std::string& input,
                bool preview, int tile, int overlap) {
    ensure_out_dir(cfg);
    auto net = ltcf::LtcfNet::load_checkpoint(checkpoint);

    std::vector<fs::path> inputs;
    if (fs::is_directory(input)) {
        for (const auto& e : fs::directory_iterator(input)) {
            if (e.is_regular_file() && ltcf::data_detail::is_image_file(e.path())) {
                inputs.push_back(e.path());
            }
        }
        std::sort(inputs.begin(), inputs.end());
        if (inputs.empty()) throw ltcf::IngestError("no images under " + input);
    } else if (fs::is_regular_file(input)) {
        inputs.push_back(input);
    } else {
        throw ltcf::IngestError("input not found: " + input);
    }

    int failures = 0;
    for (const auto& in_path : inputs) {
        try {
            auto img = ltcf::read_image(in_path.string());
            if (cfg.srgb_decode) ltcf::srgb_decode_inplace(img);
            auto out = enhance_tiled(net, img, tile, overlap);
            if (cfg.srgb_decode) ltcf::srgb_encode_inplace(out);
            auto base = in_path.filename().replace_extension(".png");
            const auto out_path = fs::path(cfg.out_dir) / base;
            ltcf::write_png(out_path.string(), out);
            if (preview) {
                auto disp = img;
                if (cfg.srgb_decode) ltcf::srgb_encode_inplace(disp);
                const auto prev_path = fs::path(cfg.out_dir) / ("preview_" + base.string());
                ltcf::write_png(prev_path.string(), side_by_side(disp, out));
            }
            std::cout << in_path.string() << " -> " << out_path.string() << "\n";
        } catch (const ltcf::Error& e) {
            ++failures;
            std::cerr << "FAILED " << in_path.string() << ": " << e.what() << "\n";
        }
    }
    if (failures) {
        std::cerr << failures << " of " << inputs.size() << " inputs failed\n";
        return kExitIngest;
    }
    return kExitOk;
}

int cmd_eval(RunConfig cfg, const std::string& checkpoint) {
    ensure_out_dir(cfg);
    auto net = ltcf::LtcfNet::load_checkpoint(checkpoint);
    auto data = load_dataset(cfg);
    std::cout << "evaluating " << data.size() << " pair(s):\n";
    run_eval(net, data, cfg, (fs::path(cfg.out_dir) / "eval.csv").string());
    return kExitOk;
}

int cmd_inspect(RunConfig cfg, const std::string& checkpoint) {
    ltcf::ModelConfig mc = cfg.model;
    if (!checkpoint.empty()) {
        auto loaded = ltcf::LtcfNet::load_checkpoint(checkpoint);
        mc = loaded.config();
    }
    auto rows = ltcf::complexity_table(mc, 256, 256);
    long long params = 0, flops = 0;
    std::cout << std::left << std::setw(18) << "module" << std::right << std::setw(12) << "params"
              << std::setw(16) << "flops@256" << "\n";
    for (const auto& r : rows) {
        params += r.params;
        flops += r.flops;
        std::cout << std::left << std::setw(18) << r.module << std::right << std::setw(12)
                  << r.params << std::setw(16) << r.flops << "\n";
    }
    std::cout << std::left << std::setw(18) << "TOTAL" << std::right << std::setw(12) << params
              << std::setw(16) << flops << "\n";
    std::cout << std::fixed << std::setprecision(3) << "params " << params / 1e6 << " M, flops "
              << flops / 1e9 << " G (at 256x256)\n"
              << std::defaultfloat;

    // the table must agree with an actually built model
    auto net = ltcf::LtcfNet::build(mc);
    if (static_cast<long long>(net.count_params()) != params) {
        throw ltcf::NumericError("complexity table disagrees with the built model");
    }

    std::cout << "\nmodel card\n"
              << "  branches: " << ltcf::to_string(mc.branches) << "\n"
              << "  fbp: " << (mc.use_fbp ? "on" : "off")
              << ", msef: " << (mc.use_msef ? "on" : "off")
              << ", shared chroma denoiser: " << (mc.share_cd_weights ? "yes" : "no") << "\n"
              << "  branch outputs are reconstructed to RGB per color space and fused by a\n"
              << "  3x3 conv in RGB; luminance attention pools to at most "
              << mc.max_attention_tokens << " tokens.\n";

    if (!cfg.out_dir.empty()) {
        ensure_out_dir(cfg);
        const auto path = fs::path(cfg.out_dir) / "inspect.csv";
        std::ofstream os(path);
        if (!os) throw ltcf::IoError("cannot write " + path.string());
        os << "module,params,flops_256\n";
        for (const auto& r : rows) os << r.module << "," << r.params << "," << r.flops << "\n";
        os << "TOTAL," << params << "," << flops << "\n";
    }
    return kExitOk;
}

void add_model_flags(CLI::App* cmd, RunConfig& cfg, std::string& branches) {
    cmd->add_option("--seed", cfg.model.seed, "RNG seed for init/training");
    cmd->add_option("--branches", branches, "color-space branches: lab|yuv|both");
    cmd->add_flag_callback(
        "--no-fbp", [&cfg]() { cfg.model.use_fbp = false; },
        "disable the Fourier brightness block (LTCF-Net*)");
    cmd->add_flag_callback(
        "--no-msef", [&cfg]() { cfg.model.use_msef = false; },
        "disable squeeze-excite fusion");
    cmd->add_flag("--share-cd,!--no-share-cd", cfg.model.share_cd_weights,
                  "share one chroma denoiser across all planes (default on)");
    cmd->add_option("--max-tokens", cfg.model.max_attention_tokens,
                    "attention token budget before pooling/tiling");
}

}  // namespace

int main(int argc, char** argv) {
    // two-phase parse: pull --config first so flags override file values
    RunConfig cfg;
    try {
        for (int i = 1; i + 1 < argc; ++i) {
            if (std::string(argv[i]) == "--config") {
                cfg = RunConfig::from_file(argv[i + 1]);
                break;
            }
        }
    } catch (const ltcf::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    CLI::App app{"ltcf: dual color-space low-light image enhancement"};
    app.require_subcommand(1);

    std::string config_file, branches, alphas_str;
    std::string checkpoint, input_path;
    bool preview = false;
    int tile = 0, overlap = 32;

    auto* tr = app.add_subcommand("train", "train a model");
    auto* en = app.add_subcommand("enhance", "enhance images with a checkpoint");
    auto* ev = app.add_subcommand("eval", "report PSNR/SSIM over a paired dataset");
    auto* in = app.add_subcommand("inspect", "parameter/FLOP accounting");

    for (CLI::App* cmd : {tr, en, ev, in}) {
        cmd->add_option("--config", config_file, "JSON config file (flags override)");
        cmd->add_option("--out", cfg.out_dir, "output directory (default $LTCF_OUT_ROOT)");
    }
    for (CLI::App* cmd : {tr, ev, in}) {
        add_model_flags(cmd, cfg, branches);
    }
    for (CLI::App* cmd : {tr, ev}) {
        cmd->add_option("--data", cfg.data_root, "dataset root with low/ and high/");
        cmd->add_option("--synthetic", cfg.synthetic, "generate N synthetic pairs instead");
        cmd->add_option("--synth-size", cfg.synth_size, "synthetic image size");
        cmd->add_flag("--srgb-decode", cfg.srgb_decode, "decode sRGB gamma on ingestion");
        cmd->add_option("--alphas", alphas_str, "a1,a2,a3,a4,a5 loss weights");
        cmd->add_option("--extractor", cfg.extractor_file,
                        "perceptual extractor checkpoint (default: seeded random)");
    }

    tr->add_option("--epochs", cfg.epochs, "training epochs");
    tr->add_option("--batch", cfg.batch, "batch size");
    tr->add_option("--patch", cfg.patch, "training crop size");
    tr->add_option("--lr", cfg.schedule.lr_initial, "initial learning rate");
    tr->add_option("--lr-final", cfg.schedule.lr_final, "final learning rate");
    tr->add_option("--lr-horizon", cfg.lr_horizon,
                   "cosine annealing horizon in epochs (0 = --epochs)");
    tr->add_option("--ckpt-every", cfg.ckpt_every, "checkpoint cadence in epochs");
    tr->add_option("--test-frac", cfg.test_frac, "held-out fraction for directory datasets");

    en->add_option("checkpoint", checkpoint, "trained checkpoint")->required();
    en->add_option("input", input_path, "image file or directory")->required();
    en->add_flag("--preview", preview, "also write low|enhanced preview grids");
    en->add_option("--tile", tile, "tile size for large inputs (0 = no tiling)");
    en->add_option("--overlap", overlap, "tile overlap in pixels");
    en->add_flag("--srgb-decode", cfg.srgb_decode, "decode sRGB gamma on ingestion");

    ev->add_option("checkpoint", checkpoint, "trained checkpoint")->required();

    in->add_option("--checkpoint", checkpoint, "inspect a checkpoint instead of flags");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (!branches.empty()) cfg.model.branches = ltcf::branches_from_string(branches);
        if (!alphas_str.empty()) {
            auto a = parse_alphas(alphas_str);
            cfg.loss.alpha1 = a[0];
            cfg.loss.alpha2 = a[1];
            cfg.loss.alpha3 = a[2];
            cfg.loss.alpha4 = a[3];
            cfg.loss.alpha5 = a[4];
        }

        if (tr->parsed()) return cmd_train(cfg);
        if (en->parsed()) return cmd_enhance(cfg, checkpoint, input_path, preview, tile, overlap);
        if (ev->parsed()) return cmd_eval(cfg, checkpoint);
        if (in->parsed()) return cmd_inspect(cfg, checkpoint);
        return kExitConfig;
    } catch (const ltcf::IngestError& e) {
        std::cerr << "ingestion error: " << e.what() << "\n";
        return kExitIngest;
    } catch (const ltcf::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ltcf::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ltcf::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
}
