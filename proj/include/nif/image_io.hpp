// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// PFM (linear float RGB, little-endian, bottom-up rows) and 8-bit PNG.

#include <png.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "nif/error.hpp"
#include "nif/image.hpp"

namespace nif {

enum class ImageFormat { png8, pfm };

namespace detail {

inline uint32_t to_le(uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace detail

inline std::string encode_pfm(const HdrImage &img) {
    std::string header = "PF\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n-1.0\n";
    std::string out = header;
    out.resize(header.size() + img.pixel_count() * 12);
    char *dst = out.data() + header.size();
    for (int y = img.height() - 1; y >= 0; --y)
        for (int x = 0; x < img.width(); ++x) {
            Rgb c = img.pixel(x, y);
            for (int k = 0; k < 3; ++k) {
                uint32_t bits = detail::to_le(std::bit_cast<uint32_t>(float(c[k])));
                std::memcpy(dst, &bits, 4);
                dst += 4;
            }
        }
    return out;
}

inline void write_pfm(const HdrImage &img, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'");
    const std::string data = encode_pfm(img);
    out.write(data.data(), std::streamsize(data.size()));
    if (!out) throw Error("failed writing '" + path + "'");
}

inline HdrImage read_pfm(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string magic;
    int w = 0, h = 0;
    double scale = 0;
    in >> magic >> w >> h >> scale;
    if (!in || (magic != "PF" && magic != "Pf") || w <= 0 || h <= 0 || scale == 0)
        throw Error("'" + path + "' is not a valid PFM file");
    in.get();  // single whitespace before the raster
    const int channels = magic == "PF" ? 3 : 1;
    const bool little = scale < 0;
    std::vector<uint32_t> raw(size_t(w) * h * channels);
    in.read(reinterpret_cast<char *>(raw.data()), std::streamsize(raw.size() * 4));
    if (in.gcount() != std::streamsize(raw.size() * 4)) throw Error("'" + path + "' is truncated");
    HdrImage img(w, h);
    const bool swap = little != (std::endian::native == std::endian::little);
    size_t k = 0;
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x) {
            float v[3];
            for (int c = 0; c < channels; ++c) {
                uint32_t b = raw[k++];
                if (swap) b = (b >> 24) | ((b >> 8) & 0xff00u) | ((b << 8) & 0xff0000u) | (b << 24);
                v[c] = std::bit_cast<float>(b);
            }
            if (channels == 1) v[1] = v[2] = v[0];
            img.add(x, y, Rgb{v[0], v[1], v[2]});
        }
    img.finish_pass();
    return img;
}

inline void write_png(const Image8 &img, const std::string &path) {
    FILE *fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw Error("cannot write '" + path + "'");
    std::unique_ptr<FILE, int (*)(FILE *)> guard(fp, &std::fclose);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed writing PNG '" + path + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, uint32_t(img.width), uint32_t(img.height), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.rgb.data() + size_t(y) * img.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Image8 read_png(const std::string &path) {
    FILE *fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw Error("cannot open '" + path + "'");
    std::unique_ptr<FILE, int (*)(FILE *)> guard(fp, &std::fclose);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng initialisation failed");
    }
    Image8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("failed reading PNG '" + path + "'");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.rgb.resize(size_t(img.width) * img.height * 3);
    for (int y = 0; y < img.height; ++y) png_read_row(png, img.rgb.data() + size_t(y) * img.width * 3, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void save_image(const HdrImage &img, const std::string &path, ImageFormat format) {
    if (format == ImageFormat::pfm)
        write_pfm(img, path);
    else
        write_png(tonemap(img), path);
}

/// PFM inputs load as linear radiance; PNG inputs are decoded back through
/// the display gamma.
inline HdrImage load_image(const std::string &path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0) return read_pfm(path);
    Image8 p = read_png(path);
    HdrImage img(p.width, p.height);
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        Rgb c;
        for (int k = 0; k < 3; ++k) c[k] = std::pow(p.rgb[i * 3 + k] / 255.0, kDisplayGamma);
        img.add(i, c);
    }
    img.finish_pass();
    return img;
}

}  // namespace nif
