// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>

#include "nif/error.hpp"

namespace nif {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double &operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3 operator+(const Vec3 &o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3 &o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3 operator*(const Vec3 &o) const { return {x * o.x, y * o.y, z * o.z}; }
    constexpr Vec3 &operator+=(const Vec3 &o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3 &operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    constexpr bool operator==(const Vec3 &) const = default;
};

constexpr Vec3 operator*(double s, const Vec3 &v) { return v * s; }

constexpr double dot(const Vec3 &a, const Vec3 &b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3 &a, const Vec3 &b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(const Vec3 &v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalize(const Vec3 &v) { return v / length(v); }
constexpr Vec3 vmin(const Vec3 &a, const Vec3 &b) {
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
constexpr Vec3 vmax(const Vec3 &a, const Vec3 &b) {
    return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

inline std::ostream &operator<<(std::ostream &os, const Vec3 &v) {
    return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
}

struct Ray {
    Vec3 origin;
    Vec3 direction;  // unit length

    Vec3 at(double t) const { return origin + direction * t; }
};

struct Aabb {
    Vec3 min{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             std::numeric_limits<double>::infinity()};
    Vec3 max{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};

    constexpr Aabb() = default;
    constexpr Aabb(const Vec3 &lo, const Vec3 &hi) : min(lo), max(hi) {}

    bool empty() const { return min.x > max.x || min.y > max.y || min.z > max.z; }
    Vec3 center() const { return (min + max) * 0.5; }
    Vec3 extent() const { return max - min; }
    Vec3 half_diagonal() const { return max - center(); }
    double diagonal() const { return empty() ? 0.0 : length(max - min); }

    void expand(const Vec3 &p) {
        min = vmin(min, p);
        max = vmax(max, p);
    }
    void expand(const Aabb &b) {
        min = vmin(min, b.min);
        max = vmax(max, b.max);
    }

    double surface_area() const {
        if (empty()) return 0.0;
        Vec3 e = extent();
        return 2.0 * (e.x * e.y + e.y * e.z + e.z * e.x);
    }

    int longest_axis() const {
        Vec3 e = extent();
        if (e.x >= e.y && e.x >= e.z) return 0;
        return e.y >= e.z ? 1 : 2;
    }

    // Inclusive containment with an absolute tolerance.
    bool contains(const Vec3 &p, double tol = 0.0) const {
        return p.x >= min.x - tol && p.x <= max.x + tol && p.y >= min.y - tol &&
               p.y <= max.y + tol && p.z >= min.z - tol && p.z <= max.z + tol;
    }
    bool contains(const Aabb &b, double tol = 0.0) const {
        return contains(b.min, tol) && contains(b.max, tol);
    }
};

inline Aabb merge(Aabb a, const Aabb &b) {
    a.expand(b);
    return a;
}

struct Triangle {
    std::array<Vec3, 3> v;
    std::array<Vec3, 3> n;  // shading normals, unit length

    Vec3 geometric_normal() const { return normalize(cross(v[1] - v[0], v[2] - v[0])); }
    double area() const { return 0.5 * length(cross(v[1] - v[0], v[2] - v[0])); }
    Aabb bounds() const {
        Aabb b;
        for (const Vec3 &p : v) b.expand(p);
        return b;
    }
    Vec3 centroid() const { return (v[0] + v[1] + v[2]) / 3.0; }

    // Builds a triangle whose shading normals equal the geometric normal.
    static Triangle flat(const Vec3 &a, const Vec3 &b, const Vec3 &c) {
        Triangle t{{a, b, c}, {}};
        Vec3 g = t.geometric_normal();
        t.n = {g, g, g};
        return t;
    }
};

inline bool is_degenerate(const Triangle &t) {
    Vec3 c = cross(t.v[1] - t.v[0], t.v[2] - t.v[0]);
    double scale = std::max({dot(t.v[1] - t.v[0], t.v[1] - t.v[0]), dot(t.v[2] - t.v[0], t.v[2] - t.v[0]),
                             dot(t.v[2] - t.v[1], t.v[2] - t.v[1])});
    return !(dot(c, c) > 1e-24 * scale * scale) || !std::isfinite(dot(c, c));
}

/// Azimuth/polar pair in the unit square. `u` wraps, `v` clamps.
struct SphericalCoord {
    double u = 0;
    double v = 0;
    bool operator==(const SphericalCoord &) const = default;
};

/// Network input for a ray that enters an object's box from outside.
struct OuterQuery {
    uint32_t object_id = 0;
    SphericalCoord p_prime;
    SphericalCoord d_prime;
};

/// Network input for a ray that starts inside an object's box.
struct InnerQuery {
    uint32_t object_id = 0;
    SphericalCoord p_prime;
    SphericalCoord d_prime;
    double r_prime = 0;
};

struct SlabInterval {
    double t_enter;
    double t_exit;
};

// Slab test. The interval is returned even when t_enter is negative (origin
// inside). NaNs from 0 * inf are discarded by the min/max ordering below.
inline std::optional<SlabInterval> ray_aabb_intersect(const Ray &ray, const Aabb &box) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        double inv = 1.0 / ray.direction[a];
        double tn = (box.min[a] - ray.origin[a]) * inv;
        double tf = (box.max[a] - ray.origin[a]) * inv;
        if (tn > tf) std::swap(tn, tf);
        // Comparisons with NaN are false, keeping the previous bound.
        t0 = tn > t0 ? tn : t0;
        t1 = tf < t1 ? tf : t1;
    }
    if (t1 < t0 || t1 < std::max(t0, 0.0)) return std::nullopt;
    return SlabInterval{t0, t1};
}

struct TriangleHit {
    double t;
    double b1, b2;
};

// Moller-Trumbore. Only hits with t > t_min are reported.
inline std::optional<TriangleHit> ray_triangle_intersect(const Ray &ray, const Triangle &tri, double t_min = 0.0,
                                                         double t_max = std::numeric_limits<double>::infinity()) {
    const Vec3 e1 = tri.v[1] - tri.v[0];
    const Vec3 e2 = tri.v[2] - tri.v[0];
    const Vec3 pv = cross(ray.direction, e2);
    const double det = dot(e1, pv);
    if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
    const double inv_det = 1.0 / det;
    const Vec3 tv = ray.origin - tri.v[0];
    const double b1 = dot(tv, pv) * inv_det;
    if (b1 < 0.0 || b1 > 1.0) return std::nullopt;
    const Vec3 qv = cross(tv, e1);
    const double b2 = dot(ray.direction, qv) * inv_det;
    if (b2 < 0.0 || b1 + b2 > 1.0) return std::nullopt;
    const double t = dot(e2, qv) * inv_det;
    if (!(t > t_min) || !(t < t_max)) return std::nullopt;
    return TriangleHit{t, b1, b2};
}

inline Vec3 interpolate_normal(const Triangle &tri, double b1, double b2) {
    Vec3 n = tri.n[0] * (1.0 - b1 - b2) + tri.n[1] * b1 + tri.n[2] * b2;
    double len = length(n);
    return len > 0 ? n / len : tri.geometric_normal();
}

// Diagnostics for the spherical parameterization. Relaxed atomics; read them
// only for reporting.
struct TransformStats {
    std::atomic<uint64_t> degenerate_inner{0};
    std::atomic<uint64_t> near_pole{0};
};

inline TransformStats &transform_stats() {
    static TransformStats stats;
    return stats;
}

// Polar angle within this many radians of a pole counts as near-pole.
inline constexpr double kPoleWindow = 1e-3;

/// u = (atan2(y, x) + pi) / 2pi wrapped into [0, 1); v = acos(z) / pi.
inline SphericalCoord dir_to_spherical(const Vec3 &d) {
    constexpr double pi = std::numbers::pi;
    double az = (d.x == 0.0 && d.y == 0.0) ? 0.0 : std::atan2(d.y, d.x);
    double u = (az + pi) / (2.0 * pi);
    u -= std::floor(u);
    if (u >= 1.0) u = 0.0;
    double v = std::acos(std::clamp(d.z, -1.0, 1.0)) / pi;
    return {u, v};
}

inline Vec3 spherical_to_dir(const SphericalCoord &s) {
    constexpr double pi = std::numbers::pi;
    double az = s.u * 2.0 * pi - pi;
    double polar = s.v * pi;
    double st = std::sin(polar);
    return {st * std::cos(az), st * std::sin(az), std::cos(polar)};
}

inline void note_pole_proximity(const SphericalCoord &s) {
    if (s.v * std::numbers::pi < kPoleWindow || (1.0 - s.v) * std::numbers::pi < kPoleWindow)
        transform_stats().near_pole.fetch_add(1, std::memory_order_relaxed);
}

/// Variant for callers that already hold the slab interval.
inline OuterQuery transform_outer_at(const Ray &ray, const Aabb &box, double t_enter, uint32_t object_id) {
    Vec3 entry = ray.at(t_enter);
    Vec3 rel = entry - box.center();
    double len = length(rel);
    OuterQuery q;
    q.object_id = object_id;
    q.p_prime = len > 0 ? dir_to_spherical(rel / len) : SphericalCoord{0.5, 0.5};
    q.d_prime = dir_to_spherical(ray.direction);
    note_pole_proximity(q.p_prime);
    return q;
}

/// Maps a ray entering `box` from outside to (entry point, direction) in
/// spherical coordinates about the box center. Rays on the same line map to
/// the same query.
inline OuterQuery transform_outer(const Ray &ray, const Aabb &box, uint32_t object_id = 0) {
    auto hit = ray_aabb_intersect(ray, box);
    if (!hit) throw Error("transform_outer: ray misses the box");
    if (!(hit->t_enter > 0.0)) throw Error("transform_outer: ray origin is inside the box");
    return transform_outer_at(ray, box, hit->t_enter, object_id);
}

inline InnerQuery transform_inner(const Vec3 &hit_point, const Vec3 &dir, const Aabb &box, uint32_t object_id = 0) {
    Vec3 rel = hit_point - box.center();
    double len = length(rel);
    InnerQuery q;
    q.object_id = object_id;
    if (len < 1e-9) {
        transform_stats().degenerate_inner.fetch_add(1, std::memory_order_relaxed);
        q.p_prime = {0.5, 0.5};
    } else {
        q.p_prime = dir_to_spherical(rel / len);
        note_pole_proximity(q.p_prime);
    }
    q.d_prime = dir_to_spherical(dir);
    double hd = length(box.half_diagonal());
    q.r_prime = hd > 0 ? std::clamp(len / hd, 0.0, 1.0) : 0.0;
    return q;
}

}  // namespace nif
