// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "nif/error.hpp"
#include "nif/geometry.hpp"
#include "nif/image.hpp"
#include "nif/rng.hpp"

namespace nif {

/// Normalized cumulative table over discrete weights.
struct TabledCdf {
    std::vector<double> cumulative;  // nondecreasing, last entry 1
    std::vector<double> pmf;

    size_t size() const { return cumulative.size(); }
};

inline TabledCdf build_cdf(std::span<const double> weights) {
    double total = 0;
    for (double w : weights) {
        if (!(w >= 0) || !std::isfinite(w)) throw Error("build_cdf: weights must be finite and nonnegative");
        total += w;
    }
    if (!(total > 0)) throw Error("build_cdf: total weight is zero");
    TabledCdf cdf;
    cdf.cumulative.resize(weights.size());
    cdf.pmf.resize(weights.size());
    double acc = 0;
    for (size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cdf.pmf[i] = weights[i] / total;
        cdf.cumulative[i] = acc / total;
    }
    cdf.cumulative.back() = 1.0;
    return cdf;
}

/// Smallest index with cumulative[i] > u (binary search).
inline size_t sample_cdf(const TabledCdf &cdf, double u) {
    auto it = std::upper_bound(cdf.cumulative.begin(), cdf.cumulative.end(), u);
    size_t i = static_cast<size_t>(it - cdf.cumulative.begin());
    return std::min(i, cdf.size() - 1);
}

struct PointLight {
    Vec3 position;
    Rgb intensity;
};

/// Parallelogram emitter: corner + s * edge_u + t * edge_v. Emits on the side
/// of cross(edge_u, edge_v).
struct AreaLight {
    Vec3 corner;
    Vec3 edge_u;
    Vec3 edge_v;
    Rgb radiance;

    Vec3 normal() const { return normalize(cross(edge_u, edge_v)); }
    double area() const { return length(cross(edge_u, edge_v)); }
    Vec3 point(double s, double t) const { return corner + edge_u * s + edge_v * t; }

    /// From four corners in winding order; the fourth must close the parallelogram.
    static AreaLight from_corners(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2, const Vec3 &p3, const Rgb &radiance) {
        Vec3 eu = p1 - p0, ev = p3 - p0;
        Vec3 closing = p0 + eu + ev;
        if (length(closing - p2) > 1e-6 * std::max(1.0, length(eu) + length(ev)))
            throw Error("area light corners do not form a parallelogram");
        if (!(length(cross(eu, ev)) > 0)) throw Error("area light has zero area");
        return {p0, eu, ev, radiance};
    }
};

/// Lat-long environment in the same spherical convention as the network
/// inputs: column ~ azimuth u, row ~ polar v (row 0 at +z).
struct EnvironmentLight {
    int width = 0, height = 0;
    std::vector<Rgb> texels;
    TabledCdf texel_cdf;

    EnvironmentLight() = default;
    EnvironmentLight(int w, int h, std::vector<Rgb> data) : width(w), height(h), texels(std::move(data)) {
        if (w <= 0 || h <= 0 || texels.size() != size_t(w) * h) throw Error("environment map has bad dimensions");
        std::vector<double> weights(texels.size());
        for (size_t i = 0; i < texels.size(); ++i) {
            if (texels[i].r < 0 || texels[i].g < 0 || texels[i].b < 0) throw Error("environment map has negative texels");
            weights[i] = texels[i].luminance();
        }
        double total = 0;
        for (double w2 : weights) total += w2;
        if (total > 0) texel_cdf = build_cdf(weights);
    }

    Rgb lookup(const Vec3 &dir) const {
        SphericalCoord s = dir_to_spherical(dir);
        int x = std::min(int(s.u * width), width - 1);
        int y = std::min(int(s.v * height), height - 1);
        return texels[size_t(y) * width + x];
    }

    /// Sum of luminance times texel solid angle.
    double integrated_luminance() const {
        constexpr double pi = std::numbers::pi;
        double sum = 0;
        for (int y = 0; y < height; ++y) {
            double solid = (2 * pi / width) * (std::cos(pi * y / height) - std::cos(pi * (y + 1) / height));
            for (int x = 0; x < width; ++x) sum += texels[size_t(y) * width + x].luminance() * solid;
        }
        return sum;
    }
};

using Light = std::variant<PointLight, AreaLight, EnvironmentLight>;

/// Radiant flux used for light selection. `scene_radius` converts the
/// environment's radiance into a power comparable with local lights.
inline double light_flux(const Light &light, double scene_radius) {
    constexpr double pi = std::numbers::pi;
    if (auto *p = std::get_if<PointLight>(&light)) return 4 * pi * p->intensity.luminance();
    if (auto *a = std::get_if<AreaLight>(&light)) return pi * a->radiance.luminance() * a->area();
    const auto &env = std::get<EnvironmentLight>(light);
    return pi * scene_radius * scene_radius * env.integrated_luminance();
}

/// Selection table over lights proportional to their flux.
inline TabledCdf build_light_cdf(std::span<const Light> lights, double scene_radius = 1.0) {
    if (lights.empty()) throw Error("build_light_cdf: no lights");
    std::vector<double> flux;
    flux.reserve(lights.size());
    for (const Light &l : lights) flux.push_back(light_flux(l, scene_radius));
    double total = 0;
    for (double f : flux) total += f;
    if (!(total > 0)) throw Error("build_light_cdf: total light flux is zero");
    return build_cdf(flux);
}

struct LightSample {
    Vec3 direction;  // unit, from the shading point toward the light
    double t_max;    // segment length; infinite for the environment
    double pdf;      // solid-angle density, or 1 for delta lights
    Rgb radiance;    // incident radiance (intensity / d^2 for point lights)
    bool delta = false;
};

inline std::optional<LightSample> sample_light_dir(const Vec3 &p, const PointLight &light, Sampler::Pair) {
    Vec3 to = light.position - p;
    double d2 = dot(to, to);
    if (!(d2 > 0)) return std::nullopt;
    double d = std::sqrt(d2);
    return LightSample{to / d, d, 1.0, light.intensity / d2, true};
}

inline std::optional<LightSample> sample_light_dir(const Vec3 &p, const AreaLight &light, Sampler::Pair u) {
    Vec3 q = light.point(u.u, u.v);
    Vec3 to = q - p;
    double d2 = dot(to, to);
    if (!(d2 > 0)) return std::nullopt;
    double d = std::sqrt(d2);
    Vec3 wi = to / d;
    double cos_l = -dot(light.normal(), wi);
    if (!(cos_l > 0)) return std::nullopt;
    double pdf = d2 / (light.area() * cos_l);
    return LightSample{wi, d, pdf, light.radiance, false};
}

inline std::optional<LightSample> sample_light_dir(const Vec3 &, const EnvironmentLight &env, Sampler::Pair u) {
    constexpr double pi = std::numbers::pi;
    if (env.texel_cdf.size() == 0) return std::nullopt;
    size_t i = sample_cdf(env.texel_cdf, u.u);
    double lo = i == 0 ? 0.0 : env.texel_cdf.cumulative[i - 1];
    double pmf = env.texel_cdf.pmf[i];
    double su = std::clamp((u.u - lo) / pmf, 0.0, std::nextafter(1.0, 0.0));
    int x = int(i % env.width), y = int(i / env.width);
    SphericalCoord s{(x + su) / env.width, (y + u.v) / env.height};
    double sin_t = std::sin(s.v * pi);
    if (!(sin_t > 0)) return std::nullopt;
    double pdf = pmf * env.width * env.height / (2 * pi * pi * sin_t);
    return LightSample{spherical_to_dir(s), std::numeric_limits<double>::infinity(), pdf, env.texels[i], false};
}

inline std::optional<LightSample> sample_light_dir(const Vec3 &p, const Light &light, Sampler::Pair u) {
    return std::visit([&](const auto &l) { return sample_light_dir(p, l, u); }, light);
}

/// Solid-angle density with which sample_light_dir(p, area) produces `wi`.
inline double area_light_pdf(const Vec3 &p, const AreaLight &light, const Vec3 &wi) {
    Vec3 n = light.normal();
    double denom = dot(n, wi);
    if (denom == 0) return 0;
    double t = dot(light.corner - p, n) / denom;
    if (!(t > 0)) return 0;
    Vec3 q = p + wi * t - light.corner;
    // Solve q = s * eu + t * ev in the light plane.
    double uu = dot(light.edge_u, light.edge_u), uv = dot(light.edge_u, light.edge_v), vv = dot(light.edge_v, light.edge_v);
    double qu = dot(q, light.edge_u), qv = dot(q, light.edge_v);
    double det = uu * vv - uv * uv;
    double s = (qu * vv - qv * uv) / det, r = (qv * uu - qu * uv) / det;
    if (s < 0 || s > 1 || r < 0 || r > 1) return 0;
    double cos_l = -denom;
    if (!(cos_l > 0)) return 0;
    return t * t / (light.area() * cos_l);
}

struct DirectionSample {
    Vec3 direction;
    double pdf;
};

inline DirectionSample sample_uniform_dir(Sampler::Pair u) {
    constexpr double pi = std::numbers::pi;
    double z = 1.0 - 2.0 * u.u;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double phi = 2 * pi * u.v;
    return {{r * std::cos(phi), r * std::sin(phi), z}, 1.0 / (4 * pi)};
}

}  // namespace nif
