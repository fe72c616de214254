#include <catch2/catch_amalgamated.hpp>

#include "ltcf/fft.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using ltcf::Rng;
using ltcf::TensorT;

TEST_CASE("fft2 of zeros is zeros", "[fft]") {
    TensorT<double> x({5, 7});
    auto z = ltcf::fft2(x);
    CHECK(z.real.max_abs() == 0.0);
    CHECK(z.imag.max_abs() == 0.0);
}

TEST_CASE("fft2 of a constant concentrates in the DC bin", "[fft]") {
    const double c = 0.37;
    TensorT<double> x = TensorT<double>::full({6, 6}, c);
    auto z = ltcf::fft2(x);
    CHECK(z.real.at(0, 0) == Catch::Approx(c * 36.0).margin(1e-9));
    CHECK(std::abs(z.imag.at(0, 0)) < 1e-9);
    double off_dc = 0.0;
    for (int y = 0; y < 6; ++y)
        for (int xx = 0; xx < 6; ++xx) {
            if (y == 0 && xx == 0) continue;
            off_dc = std::max(off_dc, std::abs(z.real.at(y, xx)));
            off_dc = std::max(off_dc, std::abs(z.imag.at(y, xx)));
        }
    CHECK(off_dc < 1e-5);
}

TEST_CASE("fft2 matches the direct DFT oracle, including odd sizes", "[fft]") {
    Rng rng(42);
    for (auto [h, w] : std::vector<std::pair<int, int>>{{4, 4}, {5, 7}, {8, 6}, {9, 9}, {12, 10}}) {
        auto x = testutil::random_tensor<double>({h, w}, rng);
        auto z = ltcf::fft2(x);
        TensorT<double> re, im;
        oracle::dft2_ref(x, re, im);
        CHECK(testutil::max_abs_diff(z.real, re) < 1e-4);
        CHECK(testutil::max_abs_diff(z.imag, im) < 1e-4);
    }
}

TEST_CASE("ifft2(fft2(x)) roundtrips and Parseval holds", "[fft]") {
    Rng rng(7);
    for (auto [h, w] :
         std::vector<std::pair<int, int>>{{4, 4}, {6, 5}, {7, 7}, {16, 16}, {31, 17}, {32, 32}}) {
        auto x = testutil::random_tensor<double>({h, w}, rng);
        auto z = ltcf::fft2(x);
        TensorT<double> imag_resid;
        auto back = ltcf::ifft2(z, &imag_resid);
        CHECK(testutil::max_abs_diff(back, x) < 1e-4);
        CHECK(imag_resid.max_abs() < 1e-6);

        double space = 0.0, freq = 0.0;
        for (double v : x.data) space += v * v;
        for (size_t i = 0; i < z.real.numel(); ++i) {
            freq += z.real.data[i] * z.real.data[i] + z.imag.data[i] * z.imag.data[i];
        }
        freq /= static_cast<double>(h) * w;
        CHECK(std::abs(space - freq) / std::abs(space) < 1e-3);
    }
}

TEST_CASE("fft2 rejects non-2D input", "[fft]") {
    CHECK_THROWS_AS(ltcf::fft2(TensorT<double>({2, 2, 2})), ltcf::ShapeError);
}
