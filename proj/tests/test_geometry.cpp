// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nif/geometry.hpp"

using namespace nif;

namespace {

const Aabb kUnitBox{{-1, -1, -1}, {1, 1, 1}};

Vec3 random_unit(std::mt19937_64 &rng) {
    std::normal_distribution<double> n;
    for (;;) {
        Vec3 v{n(rng), n(rng), n(rng)};
        if (length(v) > 1e-6) return normalize(v);
    }
}

// Independent interval oracle: intersect the line with each of the six face
// rectangles and take the extreme crossing parameters.
std::optional<SlabInterval> face_crossing_oracle(const Ray &ray, const Aabb &box) {
    std::vector<double> ts;
    for (int a = 0; a < 3; ++a) {
        if (ray.direction[a] == 0) continue;
        for (double plane : {box.min[a], box.max[a]}) {
            double t = (plane - ray.origin[a]) / ray.direction[a];
            Vec3 p = ray.at(t);
            bool inside = true;
            for (int b = 0; b < 3; ++b) {
                if (b == a) continue;
                double slack = 1e-12 * (1 + std::abs(p[b]));
                if (p[b] < box.min[b] - slack || p[b] > box.max[b] + slack) inside = false;
            }
            if (inside) ts.push_back(t);
        }
    }
    if (ts.size() < 2) return std::nullopt;
    auto [lo, hi] = std::minmax_element(ts.begin(), ts.end());
    if (*hi < std::max(*lo, 0.0)) return std::nullopt;
    return SlabInterval{*lo, *hi};
}

void expect_coord(const SphericalCoord &s, double u, double v) {
    EXPECT_NEAR(s.u, u, 1e-12);
    EXPECT_NEAR(s.v, v, 1e-12);
}

}  // namespace

TEST(RayAabb, AxisAlignedEntryAndExit) {
    auto r = ray_aabb_intersect({{5, 0, 0}, {-1, 0, 0}}, kUnitBox);
    ASSERT_TRUE(r);
    EXPECT_DOUBLE_EQ(r->t_enter, 4);
    EXPECT_DOUBLE_EQ(r->t_exit, 6);
}

TEST(RayAabb, OriginInsideGivesNegativeEntry) {
    auto r = ray_aabb_intersect({{0, 0, 0}, {1, 0, 0}}, kUnitBox);
    ASSERT_TRUE(r);
    EXPECT_DOUBLE_EQ(r->t_enter, -1);
    EXPECT_DOUBLE_EQ(r->t_exit, 1);
}

TEST(RayAabb, PointingAwayMisses) { EXPECT_FALSE(ray_aabb_intersect({{5, 5, 5}, {1, 0, 0}}, kUnitBox)); }

TEST(RayAabb, BoxBehindOriginMisses) { EXPECT_FALSE(ray_aabb_intersect({{5, 0, 0}, {1, 0, 0}}, kUnitBox)); }

TEST(RayAabb, MatchesFaceCrossingOracle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(-4, 4), ext(0.05, 2);
    int hits = 0;
    for (int i = 0; i < 100000; ++i) {
        Vec3 c{pos(rng), pos(rng), pos(rng)};
        Vec3 e{ext(rng), ext(rng), ext(rng)};
        Aabb box{c - e, c + e};
        Ray ray{{pos(rng), pos(rng), pos(rng)}, random_unit(rng)};
        auto got = ray_aabb_intersect(ray, box);
        auto want = face_crossing_oracle(ray, box);
        ASSERT_EQ(bool(got), bool(want)) << "case " << i;
        if (!got) continue;
        ++hits;
        EXPECT_NEAR(got->t_enter, want->t_enter, 1e-6 * std::max(1.0, std::abs(want->t_enter)));
        EXPECT_NEAR(got->t_exit, want->t_exit, 1e-6 * std::max(1.0, std::abs(want->t_exit)));
    }
    EXPECT_GT(hits, 1000);
}

TEST(RayTriangle, PlanarHit) {
    Triangle tri = Triangle::flat({-1, -1, 0}, {1, -1, 0}, {0, 1, 0});
    auto h = ray_triangle_intersect({{0, 0, -5}, {0, 0, 1}}, tri);
    ASSERT_TRUE(h);
    EXPECT_DOUBLE_EQ(h->t, 5);
}

TEST(RayTriangle, OutsideTriangleMisses) {
    Triangle tri = Triangle::flat({-1, -1, 0}, {1, -1, 0}, {0, 1, 0});
    EXPECT_FALSE(ray_triangle_intersect({{0, 5, -5}, {0, 0, 1}}, tri));
}

TEST(RayTriangle, ParallelRayMisses) {
    Triangle tri = Triangle::flat({-1, -1, 0}, {1, -1, 0}, {0, 1, 0});
    EXPECT_FALSE(ray_triangle_intersect({{-5, 0, 0}, {1, 0, 0}}, tri));
}

TEST(RayTriangle, RespectsTMin) {
    Triangle tri = Triangle::flat({-1, -1, 0}, {1, -1, 0}, {0, 1, 0});
    EXPECT_FALSE(ray_triangle_intersect({{0, 0, -5}, {0, 0, 1}}, tri, 5.0));
    EXPECT_FALSE(ray_triangle_intersect({{0, 0, -5}, {0, 0, 1}}, tri, 0.0, 5.0));
}

TEST(RayTriangle, BarycentricsInterpolateNormals) {
    Triangle tri{{Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{0, 1, 0}}, {Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}};
    auto h = ray_triangle_intersect({{0.25, 0.5, 1}, {0, 0, -1}}, tri);
    ASSERT_TRUE(h);
    EXPECT_NEAR(h->b1, 0.25, 1e-12);
    EXPECT_NEAR(h->b2, 0.5, 1e-12);
    Vec3 n = interpolate_normal(tri, h->b1, h->b2);
    Vec3 want = normalize(Vec3{0.25, 0.25, 0.5});
    EXPECT_NEAR(length(n - want), 0, 1e-12);
}

TEST(Spherical, StatedConvention) {
    expect_coord(dir_to_spherical({1, 0, 0}), 0.5, 0.5);
    expect_coord(dir_to_spherical({0, 0, 1}), 0.5, 0.0);
    expect_coord(dir_to_spherical({-1, 0, 0}), 0.0, 0.5);
    expect_coord(dir_to_spherical({0, 0, -1}), 0.5, 1.0);
}

TEST(Spherical, RangeAndRoundTrip) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10000; ++i) {
        Vec3 d = random_unit(rng);
        SphericalCoord s = dir_to_spherical(d);
        ASSERT_GE(s.u, 0.0);
        ASSERT_LT(s.u, 1.0);
        ASSERT_GE(s.v, 0.0);
        ASSERT_LE(s.v, 1.0);
        EXPECT_LT(length(spherical_to_dir(s) - d), 1e-6);
    }
}

TEST(Spherical, AzimuthWrapsJustBelowNegativeX) {
    // atan2(-0.0, -1) = -pi, which maps to u = 0 rather than 1.
    SphericalCoord s = dir_to_spherical({-1, -0.0, 0});
    EXPECT_GE(s.u, 0.0);
    EXPECT_LT(s.u, 1.0);
}

TEST(TransformOuter, EntryOnPositiveX) {
    OuterQuery q = transform_outer({{5, 0, 0}, {-1, 0, 0}}, kUnitBox);
    expect_coord(q.p_prime, 0.5, 0.5);
    expect_coord(q.d_prime, 0.0, 0.5);
}

TEST(TransformOuter, AliasedOriginGivesIdenticalQuery) {
    OuterQuery a = transform_outer({{5, 0, 0}, {-1, 0, 0}}, kUnitBox);
    OuterQuery b = transform_outer({{9, 0, 0}, {-1, 0, 0}}, kUnitBox);
    EXPECT_EQ(a.p_prime, b.p_prime);
    EXPECT_EQ(a.d_prime, b.d_prime);
}

TEST(TransformOuter, EntryOnPositiveY) {
    OuterQuery q = transform_outer({{0, 5, 0}, {0, -1, 0}}, kUnitBox);
    expect_coord(q.p_prime, 0.75, 0.5);
    expect_coord(q.d_prime, 0.25, 0.5);
}

TEST(TransformOuter, RejectsInsideOriginAndMiss) {
    EXPECT_THROW(transform_outer({{0, 0, 0}, {1, 0, 0}}, kUnitBox), Error);
    EXPECT_THROW(transform_outer({{5, 5, 5}, {1, 0, 0}}, kUnitBox), Error);
}

TEST(TransformOuter, AliasInvarianceOnRandomRays) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(-6, 6), ext(0.1, 2), frac(0.0, 1.0);
    int tested = 0;
    while (tested < 2000) {
        Vec3 c{pos(rng), pos(rng), pos(rng)}, e{ext(rng), ext(rng), ext(rng)};
        Aabb box{c - e, c + e};
        Vec3 target = c + Vec3{e.x * (2 * frac(rng) - 1), e.y * (2 * frac(rng) - 1), e.z * (2 * frac(rng) - 1)};
        Vec3 origin{pos(rng) * 3, pos(rng) * 3, pos(rng) * 3};
        if (box.contains(origin)) continue;
        Ray ray{origin, normalize(target - origin)};
        auto slab = ray_aabb_intersect(ray, box);
        if (!slab || slab->t_enter <= 0) continue;
        double s = frac(rng) * slab->t_enter * 0.999;
        OuterQuery a = transform_outer(ray, box);
        OuterQuery b = transform_outer({ray.at(s), ray.direction}, box);
        double du = std::abs(a.p_prime.u - b.p_prime.u);
        EXPECT_LT(std::min(du, 1 - du), 1e-6);
        EXPECT_NEAR(a.p_prime.v, b.p_prime.v, 1e-6);
        EXPECT_EQ(a.d_prime, b.d_prime);
        ++tested;
    }
}

TEST(TransformInner, FacePoint) {
    InnerQuery q = transform_inner({1, 0, 0}, {0, 0, 1}, kUnitBox);
    expect_coord(q.p_prime, 0.5, 0.5);
    expect_coord(q.d_prime, 0.5, 0.0);
    EXPECT_NEAR(q.r_prime, 1 / std::sqrt(3.0), 1e-12);
}

TEST(TransformInner, CornerHasUnitRadius) {
    EXPECT_NEAR(transform_inner({1, 1, 1}, {1, 0, 0}, kUnitBox).r_prime, 1.0, 1e-12);
}

TEST(TransformInner, HalfwayPoint) {
    EXPECT_NEAR(transform_inner({0.5, 0, 0}, {1, 0, 0}, kUnitBox).r_prime, 0.5 / std::sqrt(3.0), 1e-12);
}

TEST(TransformInner, DegenerateCenterIsCounted) {
    const uint64_t before = transform_stats().degenerate_inner.load();
    InnerQuery q = transform_inner({0, 0, 0}, {1, 0, 0}, kUnitBox);
    expect_coord(q.p_prime, 0.5, 0.5);
    EXPECT_EQ(q.r_prime, 0.0);
    EXPECT_EQ(transform_stats().degenerate_inner.load(), before + 1);
}

TEST(TransformInner, RadiusScalesLinearly) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> k(0.01, 1.0);
    for (int i = 0; i < 1000; ++i) {
        Vec3 p = random_unit(rng) * 0.9;
        double s = k(rng);
        double r1 = transform_inner(p, {1, 0, 0}, kUnitBox).r_prime;
        double rk = transform_inner(p * s, {1, 0, 0}, kUnitBox).r_prime;
        EXPECT_NEAR(rk, s * r1, 1e-12);
    }
}

TEST(Triangle, DegenerateDetection) {
    EXPECT_TRUE(is_degenerate(Triangle::flat({0, 0, 0}, {1, 1, 1}, {2, 2, 2})));
    EXPECT_TRUE(is_degenerate(Triangle::flat({0, 0, 0}, {0, 0, 0}, {1, 0, 0})));
    EXPECT_FALSE(is_degenerate(Triangle::flat({0, 0, 0}, {1, 0, 0}, {0, 1, 0})));
}

TEST(Aabb, DerivedQuantities) {
    Aabb b{{-1, -2, -3}, {1, 2, 3}};
    EXPECT_EQ(b.center(), Vec3(0, 0, 0));
    EXPECT_DOUBLE_EQ(length(b.half_diagonal()), std::sqrt(14.0));
    EXPECT_DOUBLE_EQ(b.surface_area(), 2 * (2 * 4 + 4 * 6 + 2 * 6));
    EXPECT_EQ(b.longest_axis(), 2);
    EXPECT_TRUE(Aabb{}.empty());
}
