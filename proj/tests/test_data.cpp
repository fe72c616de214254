#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "ltcf/data.hpp"
#include "support/testutil.hpp"

namespace fs = std::filesystem;
using ltcf::Rng;
using ltcf::Tensor;

namespace {

struct TempTree {
    fs::path root;
    explicit TempTree(const std::string& tag) {
        root = fs::temp_directory_path() / ("ltcf_test_" + tag);
        fs::remove_all(root);
        fs::create_directories(root / "low");
        fs::create_directories(root / "high");
    }
    ~TempTree() { fs::remove_all(root); }
};

Tensor checker(int h, int w, float a, float b) {
    Tensor t({h, w, 3});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) t.at(y, x, c) = ((x + y) % 2 == 0) ? a : b;
    return t;
}

}  // namespace

TEST_CASE("png write/read roundtrips to 8-bit precision", "[data][io]") {
    TempTree tt("io");
    Rng rng(3);
    auto img = testutil::random_tensor<float>({9, 13, 3}, rng, 0.0, 1.0);
    const auto path = (tt.root / "img.png").string();
    ltcf::write_png(path, img);
    auto back = ltcf::read_image(path);
    REQUIRE(back.shape == img.shape);
    CHECK(testutil::max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-6);
}

TEST_CASE("load_pairs pairs, sorts, and validates", "[data]") {
    TempTree tt("pairs");
    for (const char* name : {"b.png", "a.png", "c.png"}) {
        ltcf::write_png((tt.root / "low" / name).string(), checker(8, 8, 0.1f, 0.2f));
        ltcf::write_png((tt.root / "high" / name).string(), checker(8, 8, 0.7f, 0.9f));
    }
    auto ds = ltcf::load_pairs((tt.root / "low").string(), (tt.root / "high").string());
    REQUIRE(ds.size() == 3);
    CHECK(ds.pairs[0].name == "a.png");
    CHECK(ds.pairs[1].name == "b.png");
    CHECK(ds.pairs[2].name == "c.png");
    for (const auto& p : ds.pairs) {
        for (float v : p.low.data) {
            CHECK(v >= 0.f);
            CHECK(v <= 1.f);
        }
    }
}

TEST_CASE("load_pairs rejects empty, unpaired and mismatched inputs", "[data]") {
    TempTree tt("bad");
    CHECK_THROWS_AS(ltcf::load_pairs((tt.root / "low").string(), (tt.root / "high").string()),
                    ltcf::IngestError);
    CHECK_THROWS_AS(ltcf::load_pairs((tt.root / "nope").string(), (tt.root / "high").string()),
                    ltcf::IngestError);

    ltcf::write_png((tt.root / "low" / "a.png").string(), checker(8, 8, 0.1f, 0.2f));
    ltcf::write_png((tt.root / "high" / "a.png").string(), checker(6, 8, 0.7f, 0.9f));
    try {
        ltcf::load_pairs((tt.root / "low").string(), (tt.root / "high").string());
        FAIL("expected IngestError");
    } catch (const ltcf::IngestError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[8x8x3]") != std::string::npos);  // both shapes in the message
        CHECK(msg.find("[6x8x3]") != std::string::npos);
    }

    ltcf::write_png((tt.root / "low" / "orphan.png").string(), checker(8, 8, 0.1f, 0.2f));
    CHECK_THROWS_AS(ltcf::load_pairs((tt.root / "low").string(), (tt.root / "high").string()),
                    ltcf::IngestError);
}

TEST_CASE("synthesize_pair degradation law", "[data]") {
    ltcf::DegradationConfig cfg;
    Rng rng(7);

    // gamma=1, sigma=0: identity
    cfg.gamma_lo = cfg.gamma_hi = 1.0;
    cfg.sigma_lo = cfg.sigma_hi = 0.0;
    auto img = ltcf::synthesize_normal_image(12, 12, rng);
    auto pair = ltcf::synthesize_pair(img, cfg, rng);
    CHECK(testutil::max_abs_diff(pair.low, pair.high) < 1e-7);

    // gamma=3 on a constant 0.5 image: 0.125
    cfg.gamma_lo = cfg.gamma_hi = 3.0;
    auto half = Tensor::full({6, 6, 3}, 0.5f);
    auto dark = ltcf::synthesize_pair(half, cfg, rng);
    for (float v : dark.low.data) CHECK(v == Catch::Approx(0.125).margin(1e-6));

    // mean(low) <= mean(high) for any gamma >= 1 at sigma 0
    cfg.gamma_lo = 1.5;
    cfg.gamma_hi = 4.0;
    for (int i = 0; i < 5; ++i) {
        auto normal = ltcf::synthesize_normal_image(10, 10, rng);
        auto p = ltcf::synthesize_pair(normal, cfg, rng);
        double ml = 0, mh = 0;
        for (size_t j = 0; j < p.low.numel(); ++j) {
            ml += p.low.data[j];
            mh += p.high.data[j];
        }
        CHECK(ml <= mh);
    }
}

TEST_CASE("random crops are pixel-aligned across the pair", "[data]") {
    // coordinate-encoding image: ch0 = y/H, ch1 = x/W
    const int h = 19, w = 23;
    ltcf::ImagePair pair;
    pair.name = "coords";
    pair.low = Tensor({h, w, 3});
    pair.high = Tensor({h, w, 3});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            pair.low.at(y, x, 0) = pair.high.at(y, x, 0) = static_cast<float>(y) / h;
            pair.low.at(y, x, 1) = pair.high.at(y, x, 1) = static_cast<float>(x) / w;
        }
    }

    Rng rng(11);
    auto crop = ltcf::random_crop_pair(pair, 8, rng);
    REQUIRE(crop.low.shape == std::vector<int>{8, 8, 3});
    // identical windows: low and high agree, and coordinates are contiguous
    CHECK(testutil::max_abs_diff(crop.low, crop.high) == 0.0);
    const float y0 = crop.low.at(0, 0, 0) * h;
    const float x0 = crop.low.at(0, 0, 1) * w;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            CHECK(crop.low.at(y, x, 0) == Catch::Approx((y0 + y) / h).margin(1e-5));
            CHECK(crop.low.at(y, x, 1) == Catch::Approx((x0 + x) / w).margin(1e-5));
        }

    // same seed -> same window
    Rng r1(42), r2(42);
    auto c1 = ltcf::random_crop_pair(pair, 8, r1);
    auto c2 = ltcf::random_crop_pair(pair, 8, r2);
    CHECK(testutil::max_abs_diff(c1.low, c2.low) == 0.0);

    // full-size patch is the identity
    auto full = ltcf::random_crop_pair(pair, std::min(h, w), rng);
    CHECK(full.low.dim(0) == std::min(h, w));
    Rng r3(1);
    CHECK_THROWS_AS(ltcf::random_crop_pair(pair, 50, r3), ltcf::ShapeError);
}

TEST_CASE("split is a deterministic function of filenames", "[data]") {
    ltcf::PairedDataset ds;
    for (int i = 0; i < 40; ++i) {
        ltcf::ImagePair p;
        p.name = "img_" + std::to_string(i) + ".png";
        p.low = Tensor({2, 2, 3});
        p.high = Tensor({2, 2, 3});
        ds.pairs.push_back(std::move(p));
    }
    auto [tr1, te1] = ltcf::split_dataset(ds, 0.25);
    auto [tr2, te2] = ltcf::split_dataset(ds, 0.25);
    CHECK(tr1.size() == tr2.size());
    CHECK(te1.size() == te2.size());
    CHECK(tr1.size() + te1.size() == 40);
    CHECK(te1.size() > 0);
    for (size_t i = 0; i < te1.size(); ++i) CHECK(te1.pairs[i].name == te2.pairs[i].name);
    CHECK_THROWS_AS(ltcf::split_dataset(ds, 1.5), ltcf::ConfigError);
}

TEST_CASE("jpeg decoding with grayscale promotion", "[data][io]") {
    TempTree tt("jpeg");
    const auto path = (tt.root / "img.jpg").string();
    {
        // minimal libjpeg encode of a gray ramp
        FILE* f = fopen(path.c_str(), "wb");
        REQUIRE(f != nullptr);
        jpeg_compress_struct cinfo;
        jpeg_error_mgr jerr;
        cinfo.err = jpeg_std_error(&jerr);
        jpeg_create_compress(&cinfo);
        jpeg_stdio_dest(&cinfo, f);
        cinfo.image_width = 16;
        cinfo.image_height = 12;
        cinfo.input_components = 1;
        cinfo.in_color_space = JCS_GRAYSCALE;
        jpeg_set_defaults(&cinfo);
        jpeg_set_quality(&cinfo, 95, TRUE);
        jpeg_start_compress(&cinfo, TRUE);
        std::vector<JSAMPLE> row(16);
        while (cinfo.next_scanline < cinfo.image_height) {
            for (int x = 0; x < 16; ++x) row[static_cast<size_t>(x)] = static_cast<JSAMPLE>(x * 16);
            JSAMPROW rp = row.data();
            jpeg_write_scanlines(&cinfo, &rp, 1);
        }
        jpeg_finish_compress(&cinfo);
        jpeg_destroy_compress(&cinfo);
        fclose(f);
    }
    auto img = ltcf::read_image(path);
    REQUIRE(img.shape == std::vector<int>{12, 16, 3});
    // gray promoted: all three channels agree
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 16; ++x) {
            CHECK(img.at(y, x, 0) == img.at(y, x, 1));
            CHECK(img.at(y, x, 1) == img.at(y, x, 2));
        }
    CHECK(img.at(0, 8, 0) == Catch::Approx(128.0 / 255.0).margin(0.05));

    // undecodable file
    const auto junk = (tt.root / "junk.jpg").string();
    {
        std::ofstream os(junk, std::ios::binary);
        os << "this is not a jpeg";
    }
    CHECK_THROWS_AS(ltcf::read_image(junk), ltcf::IngestError);
}
