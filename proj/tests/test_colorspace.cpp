#include <catch2/catch_amalgamated.hpp>

#include "ltcf/colorspace.hpp"
#include "support/gradcheck.hpp"
#include "support/testutil.hpp"

using ltcf::ColorSpace;
using ltcf::ImagePlanesT;
using ltcf::Rng;
using ltcf::TensorT;

namespace {

template <typename T>
ImagePlanesT<T> pixel_rgb(T r, T g, T b) {
    return ltcf::make_rgb_image(TensorT<T>({1, 1, 3}, {r, g, b}));
}

}  // namespace

TEST_CASE("Eq.2 coefficient rows sum to (1, 0.00001, 0) as printed", "[colorspace]") {
    const auto& m = ltcf::colorspace_detail::kRgbToYuv;
    CHECK(std::abs(m[0] + m[1] + m[2] - 1.0) < 1e-12);
    CHECK(std::abs(m[3] + m[4] + m[5] - 0.00001) < 1e-12);
    CHECK(std::abs(m[6] + m[7] + m[8] - 0.0) < 1e-12);
}

TEST_CASE("rgb_to_yuv anchors and direct evaluation", "[colorspace]") {
    auto white = ltcf::rgb_to_yuv(pixel_rgb(1.0, 1.0, 1.0));
    CHECK(white.planes.data[0] == Catch::Approx(1.0).margin(1e-6));
    CHECK(std::abs(white.planes.data[1]) < 1e-4);
    CHECK(std::abs(white.planes.data[2]) < 1e-4);

    auto black = ltcf::rgb_to_yuv(pixel_rgb(0.0, 0.0, 0.0));
    for (double v : black.planes.data) CHECK(v == 0.0);

    auto mid = ltcf::rgb_to_yuv(pixel_rgb(0.5, 0.25, 0.75));
    CHECK(mid.planes.data[0] == Catch::Approx(0.38175).margin(1e-7));
    // direct evaluation of the printed matrix
    CHECK(mid.planes.data[1] ==
          Catch::Approx(-0.14713 * 0.5 - 0.28886 * 0.25 + 0.436 * 0.75).margin(1e-7));
    CHECK(mid.planes.data[2] ==
          Catch::Approx(0.615 * 0.5 - 0.51499 * 0.25 - 0.10001 * 0.75).margin(1e-7));
}

TEST_CASE("yuv roundtrip within 1e-5 on 100 random triples", "[colorspace]") {
    Rng rng(1234);
    for (int i = 0; i < 100; ++i) {
        auto img = pixel_rgb(rng.uniform(), rng.uniform(), rng.uniform());
        auto back = ltcf::yuv_to_rgb(ltcf::rgb_to_yuv(img));
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(back.planes.data[static_cast<size_t>(c)] -
                           img.planes.data[static_cast<size_t>(c)]) < 1e-5);
        }
    }
    auto w = ltcf::yuv_to_rgb(ltcf::rgb_to_yuv(pixel_rgb(1.0, 1.0, 1.0)));
    for (double v : w.planes.data) CHECK(v == Catch::Approx(1.0).margin(1e-5));
    auto k = ltcf::yuv_to_rgb(ltcf::rgb_to_yuv(pixel_rgb(0.0, 0.0, 0.0)));
    for (double v : k.planes.data) CHECK(v == Catch::Approx(0.0).margin(1e-5));
}

TEST_CASE("rgb_to_lab anchors", "[colorspace]") {
    auto white = ltcf::rgb_to_lab(pixel_rgb(1.0, 1.0, 1.0));
    CHECK(white.planes.data[0] == Catch::Approx(100.0).margin(1e-3));
    CHECK(std::abs(white.planes.data[1]) < 1e-3);
    CHECK(std::abs(white.planes.data[2]) < 1e-3);

    auto black = ltcf::rgb_to_lab(pixel_rgb(0.0, 0.0, 0.0));
    CHECK(std::abs(black.planes.data[0]) < 1e-9);
    CHECK(std::abs(black.planes.data[1]) < 1e-9);
    CHECK(std::abs(black.planes.data[2]) < 1e-9);

    auto gray = ltcf::rgb_to_lab(pixel_rgb(0.5, 0.5, 0.5));
    CHECK(std::abs(gray.planes.data[1]) < 1e-3);
    CHECK(std::abs(gray.planes.data[2]) < 1e-3);
    // direct evaluation of L* = 116 f(Y/Yn) - 16 with Y from the matrix row
    const double yrow = 0.2126729 + 0.7151522 + 0.0721750;
    const double fy = std::cbrt(0.5 * yrow);
    CHECK(gray.planes.data[0] == Catch::Approx(116.0 * fy - 16.0).margin(1e-4));
}

TEST_CASE("lab roundtrip within 1e-4 on 100 random in-gamut triples", "[colorspace]") {
    Rng rng(99);
    int clamped = 0;
    for (int i = 0; i < 100; ++i) {
        auto img = pixel_rgb(rng.uniform(), rng.uniform(), rng.uniform());
        auto back = ltcf::lab_to_rgb(ltcf::rgb_to_lab(img));
        clamped += back.gamut_clamped ? 1 : 0;
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(back.planes.data[static_cast<size_t>(c)] -
                           img.planes.data[static_cast<size_t>(c)]) < 1e-4);
        }
    }
    CHECK(clamped == 0);  // roundtrips stay in gamut

    auto w = ltcf::lab_to_rgb(ltcf::rgb_to_lab(pixel_rgb(1.0, 1.0, 1.0)));
    for (double v : w.planes.data) CHECK(v == Catch::Approx(1.0).margin(1e-4));
    auto k = ltcf::lab_to_rgb(ltcf::rgb_to_lab(pixel_rgb(0.0, 0.0, 0.0)));
    for (double v : k.planes.data) CHECK(v == Catch::Approx(0.0).margin(1e-4));
}

TEST_CASE("wrong source space raises a usage error", "[colorspace]") {
    auto rgb = pixel_rgb(0.3, 0.4, 0.5);
    CHECK_THROWS_AS(ltcf::yuv_to_rgb(rgb), ltcf::UsageError);
    auto yuv = ltcf::rgb_to_yuv(rgb);
    CHECK_THROWS_AS(ltcf::rgb_to_yuv(yuv), ltcf::UsageError);
    CHECK_THROWS_AS(ltcf::lab_to_rgb(yuv), ltcf::UsageError);
}

TEST_CASE("normalize_for_net midpoints and exact inverse", "[colorspace]") {
    ImagePlanesT<double> lab{ColorSpace::LAB, TensorT<double>({1, 1, 3}, {50.0, 0.0, 0.0}), false};
    auto n = ltcf::normalize_for_net(lab);
    CHECK(n.data[0] == Catch::Approx(0.0).margin(1e-9));  // L*=50 is the range midpoint

    ImagePlanesT<double> yuv{ColorSpace::YUV, TensorT<double>({1, 1, 3}, {0.38175, 0.0, 0.0}),
                             false};
    CHECK(ltcf::normalize_for_net(yuv).data[0] == Catch::Approx(-0.2365).margin(1e-9));

    Rng rng(55);
    for (ColorSpace s : {ColorSpace::RGB, ColorSpace::LAB, ColorSpace::YUV}) {
        auto ranges = ltcf::channel_ranges(s);
        TensorT<double> t({2, 2, 3});
        for (int p = 0; p < 4; ++p)
            for (int c = 0; c < 3; ++c)
                t.data[static_cast<size_t>(p * 3 + c)] =
                    rng.uniform(ranges[static_cast<size_t>(c)].first,
                                ranges[static_cast<size_t>(c)].second);
        ImagePlanesT<double> img{s, t, false};
        auto back = ltcf::denormalize_from_net(ltcf::normalize_for_net(img), s);
        CHECK(testutil::max_abs_diff(back.planes, t) < 1e-6);
    }
}

TEST_CASE("luminance perturbation leaves chroma planes untouched", "[colorspace]") {
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        auto img = pixel_rgb(rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8));

        auto lab = ltcf::rgb_to_lab(img);
        auto bumped = lab;
        bumped.planes.data[0] += 2.0;  // L* only
        auto rgb2 = ltcf::lab_to_rgb(bumped);
        auto lab2 = ltcf::rgb_to_lab(rgb2);
        CHECK(std::abs(lab2.planes.data[1] - lab.planes.data[1]) < 1e-4);
        CHECK(std::abs(lab2.planes.data[2] - lab.planes.data[2]) < 1e-4);

        auto yuv = ltcf::rgb_to_yuv(img);
        auto ybump = yuv;
        ybump.planes.data[0] = std::min(1.0, ybump.planes.data[0] + 0.05);
        auto rgb3 = ltcf::yuv_to_rgb(ybump);
        auto yuv2 = ltcf::rgb_to_yuv(rgb3);
        CHECK(std::abs(yuv2.planes.data[1] - yuv.planes.data[1]) < 1e-4);
        CHECK(std::abs(yuv2.planes.data[2] - yuv.planes.data[2]) < 1e-4);
    }
}

TEST_CASE("colorspace maps pass finite-difference checks", "[colorspace][fd]") {
    Rng rng(31);
    auto x = ltcf::input<double>(testutil::random_tensor<double>({2, 2, 3}, rng, 0.1, 0.9), true);

    auto eval_lab = [&]() {
        return ltcf::mean_all(ltcf::square(ltcf::rgb_to_lab_graph(x)))->value.data[0];
    };
    auto evalb_lab = [&]() {
        ltcf::backward(ltcf::mean_all(ltcf::square(ltcf::rgb_to_lab_graph(x))));
    };
    CHECK(gradcheck::check({x}, eval_lab, evalb_lab, 32, 12).ok());

    auto eval_rt = [&]() {
        return ltcf::mean_all(
                   ltcf::square(ltcf::lab_to_rgb_graph(ltcf::rgb_to_lab_graph(x))))
            ->value.data[0];
    };
    auto evalb_rt = [&]() {
        ltcf::backward(
            ltcf::mean_all(ltcf::square(ltcf::lab_to_rgb_graph(ltcf::rgb_to_lab_graph(x)))));
    };
    CHECK(gradcheck::check({x}, eval_rt, evalb_rt, 33, 12).ok());

    auto eval_yuv = [&]() {
        return ltcf::mean_all(
                   ltcf::square(ltcf::yuv_to_rgb_graph(ltcf::rgb_to_yuv_graph(x))))
            ->value.data[0];
    };
    auto evalb_yuv = [&]() {
        ltcf::backward(
            ltcf::mean_all(ltcf::square(ltcf::yuv_to_rgb_graph(ltcf::rgb_to_yuv_graph(x)))));
    };
    CHECK(gradcheck::check({x}, eval_yuv, evalb_yuv, 34, 12).ok());
}
