// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Wavefront OBJ subset: v, vn and f records, polygons fan-triangulated.
// vt, vp, o, g, s, l, usemtl and mtllib are skipped; any other record is an error.

#include <charconv>
#include <cstdio>
#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nif/error.hpp"
#include "nif/geometry.hpp"

namespace nif {

struct ObjMesh {
    std::vector<Triangle> triangles;
    size_t dropped_degenerate = 0;
};

namespace detail {

inline double parse_obj_real(std::string_view tok, size_t line) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw Error("obj line " + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
    return v;
}

// Resolves a 1-based (or negative, relative) OBJ index.
inline size_t resolve_obj_index(std::string_view tok, size_t count, size_t line) {
    long idx = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), idx);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || idx == 0)
        throw Error("obj line " + std::to_string(line) + ": bad index '" + std::string(tok) + "'");
    long resolved = idx > 0 ? idx - 1 : long(count) + idx;
    if (resolved < 0 || size_t(resolved) >= count)
        throw Error("obj line " + std::to_string(line) + ": index " + std::to_string(idx) + " out of range");
    return size_t(resolved);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
        size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

}  // namespace detail

inline ObjMesh parse_obj(std::istream &in) {
    std::vector<Vec3> positions, normals;
    ObjMesh mesh;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view sv(line);
        if (auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
        auto tok = detail::split_ws(sv);
        if (tok.empty()) continue;
        if (tok[0] == "v" || tok[0] == "vn") {
            if (tok.size() < 4) throw Error("obj line " + std::to_string(line_no) + ": expected 3 coordinates");
            Vec3 p{detail::parse_obj_real(tok[1], line_no), detail::parse_obj_real(tok[2], line_no),
                   detail::parse_obj_real(tok[3], line_no)};
            (tok[0] == "v" ? positions : normals).push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw Error("obj line " + std::to_string(line_no) + ": face needs >= 3 vertices");
            struct Corner {
                size_t v;
                long n;
            };
            std::vector<Corner> corners;
            for (size_t k = 1; k < tok.size(); ++k) {
                std::string_view t = tok[k];
                size_t s1 = t.find('/');
                Corner c{detail::resolve_obj_index(t.substr(0, s1), positions.size(), line_no), -1};
                if (s1 != std::string_view::npos) {
                    size_t s2 = t.find('/', s1 + 1);
                    if (s2 != std::string_view::npos && s2 + 1 < t.size())
                        c.n = long(detail::resolve_obj_index(t.substr(s2 + 1), normals.size(), line_no));
                }
                corners.push_back(c);
            }
            for (size_t k = 1; k + 1 < corners.size(); ++k) {
                const Corner tri[3] = {corners[0], corners[k], corners[k + 1]};
                Triangle t{{positions[tri[0].v], positions[tri[1].v], positions[tri[2].v]}, {}};
                if (is_degenerate(t)) {
                    ++mesh.dropped_degenerate;
                    continue;
                }
                const Vec3 g = t.geometric_normal();
                for (int c = 0; c < 3; ++c) {
                    Vec3 n = tri[c].n >= 0 ? normals[size_t(tri[c].n)] : g;
                    double len = length(n);
                    t.n[c] = len > 0 && std::isfinite(len) ? n / len : g;
                }
                mesh.triangles.push_back(t);
            }
        } else if (tok[0] != "vt" && tok[0] != "vp" && tok[0] != "o" && tok[0] != "g" && tok[0] != "s" &&
                   tok[0] != "l" && tok[0] != "usemtl" && tok[0] != "mtllib") {
            throw Error("obj line " + std::to_string(line_no) + ": unknown record '" + std::string(tok[0]) + "'");
        }
    }
    return mesh;
}

inline ObjMesh load_obj(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open obj file '" + path + "'");
    try {
        return parse_obj(in);
    } catch (const Error &e) {
        throw Error(path + ": " + e.what());
    }
}

/// Writes positions and per-corner normals, sharing bitwise-equal vertices.
inline void write_obj(const std::string &path, const std::vector<Triangle> &tris) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write obj file '" + path + "'");
    using Key = std::array<double, 3>;
    std::map<Key, size_t> pos_index, nrm_index;
    std::vector<Key> pos, nrm;
    auto intern = [](std::map<Key, size_t> &index, std::vector<Key> &list, const Vec3 &v) {
        auto [it, inserted] = index.try_emplace(Key{v.x, v.y, v.z}, list.size() + 1);
        if (inserted) list.push_back(it->first);
        return it->second;
    };
    std::vector<std::array<size_t, 6>> faces;
    faces.reserve(tris.size());
    for (const Triangle &t : tris) {
        std::array<size_t, 6> f;
        for (int c = 0; c < 3; ++c) {
            f[2 * c] = intern(pos_index, pos, t.v[c]);
            f[2 * c + 1] = intern(nrm_index, nrm, t.n[c]);
        }
        faces.push_back(f);
    }
    char buf[160];
    for (const Key &p : pos) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p[0], p[1], p[2]);
        out << buf;
    }
    for (const Key &n : nrm) {
        std::snprintf(buf, sizeof buf, "vn %.17g %.17g %.17g\n", n[0], n[1], n[2]);
        out << buf;
    }
    for (const auto &f : faces)
        out << "f " << f[0] << "//" << f[1] << ' ' << f[2] << "//" << f[3] << ' ' << f[4] << "//" << f[5] << '\n';
    if (!out) throw Error("failed writing obj file '" + path + "'");
}

}  // namespace nif
