// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "nif/error.hpp"

namespace nif {

struct Rgb {
    double r = 0, g = 0, b = 0;

    constexpr Rgb() = default;
    constexpr Rgb(double r_, double g_, double b_) : r(r_), g(g_), b(b_) {}
    constexpr explicit Rgb(double v) : r(v), g(v), b(v) {}

    constexpr Rgb operator+(const Rgb &o) const { return {r + o.r, g + o.g, b + o.b}; }
    constexpr Rgb operator-(const Rgb &o) const { return {r - o.r, g - o.g, b - o.b}; }
    constexpr Rgb operator*(const Rgb &o) const { return {r * o.r, g * o.g, b * o.b}; }
    constexpr Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    constexpr Rgb operator/(double s) const { return {r / s, g / s, b / s}; }
    constexpr Rgb &operator+=(const Rgb &o) {
        r += o.r;
        g += o.g;
        b += o.b;
        return *this;
    }
    constexpr double operator[](int i) const { return i == 0 ? r : (i == 1 ? g : b); }
    constexpr double &operator[](int i) { return i == 0 ? r : (i == 1 ? g : b); }
    constexpr bool operator==(const Rgb &) const = default;

    constexpr double luminance() const { return 0.2126 * r + 0.7152 * g + 0.0722 * b; }
    constexpr bool is_black() const { return r == 0 && g == 0 && b == 0; }
};

constexpr Rgb operator*(double s, const Rgb &c) { return c * s; }

/// Progressive radiance buffer. Stores per-pixel sums and a shared sample count.
class HdrImage {
  public:
    HdrImage() = default;
    HdrImage(int width, int height) : width_(width), height_(height), sum_(size_t(width) * height) {
        if (width <= 0 || height <= 0) throw Error("HdrImage: non-positive dimensions");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t pixel_count() const { return sum_.size(); }
    uint32_t sample_count() const { return samples_; }

    void add(int x, int y, const Rgb &c) { sum_[index(x, y)] += c; }
    void add(size_t i, const Rgb &c) { sum_[i] += c; }
    void finish_pass(uint32_t samples = 1) { samples_ += samples; }

    /// Mean radiance of a pixel.
    Rgb pixel(int x, int y) const { return pixel(index(x, y)); }
    Rgb pixel(size_t i) const { return samples_ ? sum_[i] / samples_ : sum_[i]; }

    /// Overwrites a pixel with a final value and a sample count of one.
    void set(int x, int y, const Rgb &c) {
        normalize();
        sum_[index(x, y)] = c;
    }

    /// Folds the sample count into the stored values so they read as means.
    void normalize() {
        if (samples_ > 1)
            for (Rgb &c : sum_) c = c / samples_;
        samples_ = 1;
    }

    /// Sum of two accumulations over disjoint sample sets.
    void merge(const HdrImage &o) {
        if (o.width_ != width_ || o.height_ != height_) throw Error("HdrImage::merge: size mismatch");
        for (size_t i = 0; i < sum_.size(); ++i) sum_[i] += o.sum_[i];
        samples_ += o.samples_;
    }

    size_t index(int x, int y) const { return size_t(y) * width_ + x; }

  private:
    int width_ = 0, height_ = 0;
    std::vector<Rgb> sum_;
    uint32_t samples_ = 0;
};

/// 8-bit sRGB-style image, row 0 at the top.
struct Image8 {
    int width = 0, height = 0;
    std::vector<uint8_t> rgb;  // width * height * 3

    uint8_t at(int x, int y, int c) const { return rgb[(size_t(y) * width + x) * 3 + c]; }
};

inline constexpr double kDisplayGamma = 2.2;

/// Clamp to [0, 1], apply 1/2.2 gamma, round to the nearest 8-bit level.
inline uint8_t tonemap_channel(double linear) {
    if (!(linear > 0.0)) return 0;
    if (linear >= 1.0) return 255;
    double v = std::pow(linear, 1.0 / kDisplayGamma);
    return static_cast<uint8_t>(std::floor(255.0 * v + 0.5));
}

inline Image8 tonemap(const HdrImage &img) {
    Image8 out{img.width(), img.height(), std::vector<uint8_t>(img.pixel_count() * 3)};
    for (size_t i = 0; i < img.pixel_count(); ++i) {
        Rgb c = img.pixel(i);
        for (int k = 0; k < 3; ++k) out.rgb[i * 3 + k] = tonemap_channel(c[k]);
    }
    return out;
}

/// PSNR between two 8-bit images over all channels. Identical inputs yield +inf.
inline double psnr(const Image8 &a, const Image8 &b) {
    if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size())
        throw Error("psnr: image dimensions differ");
    if (a.rgb.empty()) throw Error("psnr: empty images");
    double se = 0;
    for (size_t i = 0; i < a.rgb.size(); ++i) {
        double d = double(a.rgb[i]) - double(b.rgb[i]);
        se += d * d;
    }
    double mse = se / double(a.rgb.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

inline double psnr(const HdrImage &a, const HdrImage &b) {
    if (a.width() != b.width() || a.height() != b.height()) throw Error("psnr: image dimensions differ");
    return psnr(tonemap(a), tonemap(b));
}

/// Per-channel |a - b| * k, clamped to [0, 1], then tonemapped.
inline Image8 error_image(const HdrImage &a, const HdrImage &b, double k) {
    if (a.width() != b.width() || a.height() != b.height()) throw Error("error_image: image dimensions differ");
    HdrImage diff(a.width(), a.height());
    for (size_t i = 0; i < a.pixel_count(); ++i) {
        Rgb pa = a.pixel(i), pb = b.pixel(i), d;
        for (int c = 0; c < 3; ++c) d[c] = std::clamp(std::abs(pa[c] - pb[c]) * k, 0.0, 1.0);
        diff.add(i, d);
    }
    diff.finish_pass();
    return tonemap(diff);
}

}  // namespace nif
