// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Procedural test meshes with smooth per-vertex normals.

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "nif/error.hpp"
#include "nif/geometry.hpp"

namespace nif {

/// Subdivided icosahedron projected onto a sphere. 20 * 4^subdivisions triangles.
inline std::vector<Triangle> make_icosphere(int subdivisions, double radius = 1.0, Vec3 center = {}) {
    if (subdivisions < 0 || subdivisions > 8) throw Error("icosphere: subdivisions must be in [0, 8]");
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                               {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (Vec3 &v : verts) v = normalize(v);
    std::vector<std::array<int, 3>> faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back(normalize((verts[a] + verts[b]) * 0.5));
            return midpoint[key] = int(verts.size()) - 1;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (auto [a, b, c] : faces) {
            int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    std::vector<Triangle> tris;
    tris.reserve(faces.size());
    for (auto [a, b, c] : faces)
        tris.push_back({{center + verts[a] * radius, center + verts[b] * radius, center + verts[c] * radius},
                        {verts[a], verts[b], verts[c]}});
    return tris;
}

/// Latitude/longitude sphere around the z axis: 2 * slices * (stacks - 1) triangles.
inline std::vector<Triangle> make_uv_sphere(int stacks, int slices, double radius = 1.0, Vec3 center = {}) {
    if (stacks < 2 || slices < 3) throw Error("uv sphere: need stacks >= 2 and slices >= 3");
    auto point = [&](int i, int j) {
        double theta = std::numbers::pi * i / stacks, phi = 2 * std::numbers::pi * (j % slices) / slices;
        return Vec3{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
    };
    std::vector<Triangle> tris;
    tris.reserve(size_t(2) * slices * (stacks - 1));
    auto push = [&](Vec3 a, Vec3 b, Vec3 c) {
        tris.push_back({{center + a * radius, center + b * radius, center + c * radius}, {a, b, c}});
    };
    for (int i = 0; i < stacks; ++i)
        for (int j = 0; j < slices; ++j) {
            Vec3 p00 = point(i, j), p01 = point(i, j + 1), p10 = point(i + 1, j), p11 = point(i + 1, j + 1);
            if (i > 0) push(p00, p10, p01);
            if (i < stacks - 1) push(p01, p10, p11);
        }
    return tris;
}

/// Torus in the xy plane: 2 * rings * sides triangles.
inline std::vector<Triangle> make_torus(double major, double minor, int rings, int sides, Vec3 center = {}) {
    if (!(major > minor && minor > 0) || rings < 3 || sides < 3) throw Error("torus: bad parameters");
    auto vertex = [&](int i, int j, Vec3 &n) {
        double a = 2 * std::numbers::pi * (i % rings) / rings, b = 2 * std::numbers::pi * (j % sides) / sides;
        Vec3 ring{std::cos(a), std::sin(a), 0};
        n = ring * std::cos(b) + Vec3{0, 0, std::sin(b)};
        return center + ring * major + n * minor;
    };
    std::vector<Triangle> tris;
    tris.reserve(size_t(2) * rings * sides);
    for (int i = 0; i < rings; ++i)
        for (int j = 0; j < sides; ++j) {
            Vec3 n00, n10, n01, n11;
            Vec3 p00 = vertex(i, j, n00), p10 = vertex(i + 1, j, n10), p01 = vertex(i, j + 1, n01),
                 p11 = vertex(i + 1, j + 1, n11);
            tris.push_back({{p00, p10, p11}, {n00, n10, n11}});
            tris.push_back({{p00, p11, p01}, {n00, n11, n01}});
        }
    return tris;
}

/// Square in the plane z = height, facing +z, split into 2 * cells^2 triangles.
inline std::vector<Triangle> make_plane(double half_size, double height = 0.0, int cells = 1) {
    if (!(half_size > 0) || cells < 1) throw Error("plane: bad parameters");
    std::vector<Triangle> tris;
    const double step = 2 * half_size / cells;
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            double x0 = -half_size + i * step, y0 = -half_size + j * step;
            Vec3 a{x0, y0, height}, b{x0 + step, y0, height}, c{x0 + step, y0 + step, height}, d{x0, y0 + step, height};
            tris.push_back(Triangle::flat(a, b, c));
            tris.push_back(Triangle::flat(a, c, d));
        }
    return tris;
}

/// Axis-aligned box as 12 outward-facing flat triangles.
inline std::vector<Triangle> make_box(const Vec3 &lo, const Vec3 &hi) {
    const Vec3 c[8] = {{lo.x, lo.y, lo.z}, {hi.x, lo.y, lo.z}, {hi.x, hi.y, lo.z}, {lo.x, hi.y, lo.z},
                       {lo.x, lo.y, hi.z}, {hi.x, lo.y, hi.z}, {hi.x, hi.y, hi.z}, {lo.x, hi.y, hi.z}};
    const int quads[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {2, 3, 7, 6}, {1, 2, 6, 5}, {0, 4, 7, 3}};
    std::vector<Triangle> tris;
    for (auto &q : quads) {
        tris.push_back(Triangle::flat(c[q[0]], c[q[1]], c[q[2]]));
        tris.push_back(Triangle::flat(c[q[0]], c[q[2]], c[q[3]]));
    }
    return tris;
}

inline void translate(std::vector<Triangle> &tris, const Vec3 &offset) {
    for (Triangle &t : tris)
        for (Vec3 &v : t.v) v = v + offset;
}

}  // namespace nif
