#pragma once

#include <csetjmp>
#include <cstdio>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "ltcf/errors.hpp"
#include "ltcf/tensor.hpp"

namespace ltcf {

namespace image_detail {

struct FileCloser {
    FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    for (size_t i = 0; i < suf.size(); ++i) {
        const char a = s[s.size() - suf.size() + i];
        const char b = suf[i];
        if (std::tolower(static_cast<unsigned char>(a)) != b) return false;
    }
    return true;
}

inline Tensor decode_png(FILE* f, const std::string& path) {
    png_byte header[8];
    if (std::fread(header, 1, 8, f) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw IngestError("not a PNG file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IngestError("libpng init failed for " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IngestError("libpng info init failed for " + path);
    }
    std::vector<png_bytep> rows;
    std::vector<png_byte> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestError("undecodable PNG: " + path);
    }
    png_init_io(png, f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_set_strip_16(png);        // 8-bit
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);     // grayscale promoted to 3 channels
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = static_cast<int>(png_get_channels(png, info));
    if (ch != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IngestError("unsupported PNG channel layout in " + path);
    }
    pixels.resize(static_cast<size_t>(h) * w * 3);
    rows.resize(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = &pixels[static_cast<size_t>(y) * w * 3];
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor t({h, w, 3});
    for (size_t i = 0; i < t.numel(); ++i) t.data[i] = static_cast<float>(pixels[i]) / 255.f;
    return t;
}

inline Tensor decode_jpeg(FILE* f, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.pub);
    err.pub.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IngestError("undecodable JPEG: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;  // grayscale promoted by libjpeg
    jpeg_start_decompress(&cinfo);

    const int h = static_cast<int>(cinfo.output_height);
    const int w = static_cast<int>(cinfo.output_width);
    Tensor t({h, w, 3});
    std::vector<JSAMPLE> row(static_cast<size_t>(w) * 3);
    JSAMPROW rp = row.data();
    for (int y = 0; y < h; ++y) {
        jpeg_read_scanlines(&cinfo, &rp, 1);
        for (int i = 0; i < w * 3; ++i) {
            t.data[static_cast<size_t>(y) * w * 3 + i] = static_cast<float>(row[static_cast<size_t>(i)]) / 255.f;
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return t;
}

}  // namespace image_detail

/// Decodes an 8-bit PNG or JPEG into HxWx3 floats in [0,1]. Grayscale inputs
/// are promoted to three channels, alpha is dropped.
inline Tensor read_image(const std::string& path) {
    image_detail::FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw IngestError("cannot open image: " + path);
    if (image_detail::has_suffix(path, ".png")) return image_detail::decode_png(fc.f, path);
    if (image_detail::has_suffix(path, ".jpg") || image_detail::has_suffix(path, ".jpeg")) {
        return image_detail::decode_jpeg(fc.f, path);
    }
    // sniff: PNG signature, otherwise try JPEG
    unsigned char sig[2] = {0, 0};
    if (std::fread(sig, 1, 2, fc.f) == 2 && sig[0] == 0x89 && sig[1] == 'P') {
        std::rewind(fc.f);
        return image_detail::decode_png(fc.f, path);
    }
    std::rewind(fc.f);
    return image_detail::decode_jpeg(fc.f, path);
}

/// Writes HxWx3 floats in [0,1] as an 8-bit PNG.
inline void write_png(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 3) {
        throw ShapeError("write_png expects HxWx3, got " + img.shape_str());
    }
    image_detail::FileCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw IoError("cannot write image: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng write init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng write info init failed");
    }
    const int h = img.dim(0), w = img.dim(1);
    std::vector<png_byte> pixels(static_cast<size_t>(h) * w * 3);
    for (size_t i = 0; i < pixels.size(); ++i) {
        const float v = std::min(std::max(img.data[i], 0.f), 1.f);
        pixels[i] = static_cast<png_byte>(v * 255.f + 0.5f);
    }
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = &pixels[static_cast<size_t>(y) * w * 3];

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed for " + path);
    }
    png_init_io(png, fc.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace ltcf
