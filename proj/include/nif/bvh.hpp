// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Binary BVH with a binned SAH builder. The same structure serves as the
// per-object (bottom-level) tree over triangles and as the top-level tree over
// object boxes; only the primitive bounds differ.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "nif/error.hpp"
#include "nif/geometry.hpp"

namespace nif {

struct BvhNode {
    Aabb bounds;
    uint32_t left_or_first = 0;  // internal: left child index; leaf: offset into prim_order
    uint32_t right = 0;          // internal only
    uint32_t prim_count = 0;     // zero for internal nodes

    bool is_leaf() const { return prim_count > 0; }
};

struct SahParams {
    int bins = 16;
    uint32_t max_leaf_size = 4;
    double traversal_cost = 1.0;
    double intersection_cost = 1.5;
};

struct Bvh {
    std::vector<BvhNode> nodes;
    std::vector<uint32_t> prim_order;

    bool empty() const { return nodes.empty(); }
    Aabb bounds() const { return nodes.empty() ? Aabb{} : nodes.front().bounds; }
};

namespace detail {

class SahBuilder {
  public:
    SahBuilder(std::span<const Aabb> prims, const SahParams &params) : prims_(prims), params_(params) {
        centroids_.reserve(prims.size());
        for (const Aabb &b : prims) centroids_.push_back(b.center());
    }

    Bvh build() {
        Bvh bvh;
        bvh.prim_order.resize(prims_.size());
        std::iota(bvh.prim_order.begin(), bvh.prim_order.end(), 0u);
        bvh.nodes.reserve(2 * prims_.size());
        order_ = &bvh.prim_order;
        nodes_ = &bvh.nodes;
        nodes_->emplace_back();
        build_node(0, 0, static_cast<uint32_t>(prims_.size()));
        nodes_->shrink_to_fit();
        return bvh;
    }

  private:
    struct Bin {
        Aabb bounds;
        uint32_t count = 0;
    };

    void make_leaf(uint32_t node, uint32_t begin, uint32_t end) {
        (*nodes_)[node].left_or_first = begin;
        (*nodes_)[node].prim_count = end - begin;
    }

    void build_node(uint32_t node, uint32_t begin, uint32_t end) {
        std::vector<uint32_t> &order = *order_;
        Aabb bounds, cbounds;
        for (uint32_t i = begin; i < end; ++i) {
            bounds.expand(prims_[order[i]]);
            cbounds.expand(centroids_[order[i]]);
        }
        (*nodes_)[node].bounds = bounds;
        const uint32_t n = end - begin;
        if (n == 1) return make_leaf(node, begin, end);

        // Best binned split over all axes.
        const int nb = params_.bins;
        double best_cost = std::numeric_limits<double>::infinity();
        int best_axis = -1, best_split = -1;
        std::vector<Bin> bins(nb);
        std::vector<double> right_area(nb), right_count(nb);
        const double parent_area = bounds.surface_area();
        for (int axis = 0; axis < 3; ++axis) {
            double lo = cbounds.min[axis], hi = cbounds.max[axis];
            if (!(hi > lo)) continue;
            std::fill(bins.begin(), bins.end(), Bin{});
            double scale = nb / (hi - lo);
            for (uint32_t i = begin; i < end; ++i) {
                int b = bin_index(centroids_[order[i]][axis], lo, scale);
                bins[b].count++;
                bins[b].bounds.expand(prims_[order[i]]);
            }
            Aabb acc;
            uint32_t cnt = 0;
            for (int b = nb - 1; b > 0; --b) {
                acc.expand(bins[b].bounds);
                cnt += bins[b].count;
                right_area[b] = acc.surface_area();
                right_count[b] = cnt;
            }
            acc = Aabb{};
            cnt = 0;
            for (int b = 0; b < nb - 1; ++b) {
                acc.expand(bins[b].bounds);
                cnt += bins[b].count;
                if (cnt == 0 || right_count[b + 1] == 0) continue;
                double cost = params_.traversal_cost +
                              params_.intersection_cost *
                                  (acc.surface_area() * cnt + right_area[b + 1] * right_count[b + 1]) /
                                  (parent_area > 0 ? parent_area : 1.0);
                if (cost < best_cost) {
                    best_cost = cost;
                    best_axis = axis;
                    best_split = b;
                }
            }
        }

        const double leaf_cost = params_.intersection_cost * n;
        if (n <= params_.max_leaf_size && (best_axis < 0 || leaf_cost <= best_cost))
            return make_leaf(node, begin, end);

        uint32_t mid;
        if (best_axis < 0) {
            // All centroids coincide: split by index.
            mid = begin + n / 2;
        } else {
            double lo = cbounds.min[best_axis];
            double scale = nb / (cbounds.max[best_axis] - lo);
            auto it = std::stable_partition(order.begin() + begin, order.begin() + end, [&](uint32_t p) {
                return bin_index(centroids_[p][best_axis], lo, scale) <= best_split;
            });
            mid = static_cast<uint32_t>(it - order.begin());
            if (mid == begin || mid == end) mid = begin + n / 2;
        }

        uint32_t left = static_cast<uint32_t>(nodes_->size());
        nodes_->emplace_back();
        build_node(left, begin, mid);
        uint32_t right = static_cast<uint32_t>(nodes_->size());
        nodes_->emplace_back();
        build_node(right, mid, end);
        (*nodes_)[node].left_or_first = left;
        (*nodes_)[node].right = right;
        (*nodes_)[node].prim_count = 0;
    }

    int bin_index(double c, double lo, double scale) const {
        int b = static_cast<int>((c - lo) * scale);
        return std::clamp(b, 0, params_.bins - 1);
    }

    std::span<const Aabb> prims_;
    SahParams params_;
    std::vector<Vec3> centroids_;
    std::vector<uint32_t> *order_ = nullptr;
    std::vector<BvhNode> *nodes_ = nullptr;
};

}  // namespace detail

/// Builds a BVH over arbitrary primitive boxes. Deterministic for a fixed input order.
inline Bvh build_bvh(std::span<const Aabb> prim_bounds, const SahParams &params = {}) {
    if (prim_bounds.empty()) throw Error("build_bvh: no primitives");
    return detail::SahBuilder(prim_bounds, params).build();
}

inline Bvh build_bottom(std::span<const Triangle> triangles, const SahParams &params = {}) {
    if (triangles.empty()) throw Error("build_bottom: empty triangle list");
    std::vector<Aabb> boxes;
    boxes.reserve(triangles.size());
    for (const Triangle &t : triangles) boxes.push_back(t.bounds());
    return build_bvh(boxes, params);
}

inline Bvh build_top(std::span<const Aabb> object_bounds, const SahParams &params = {}) {
    if (object_bounds.empty()) throw Error("build_top: no objects");
    return build_bvh(object_bounds, params);
}

/// Ray with precomputed reciprocal direction for node tests.
struct TraversalRay {
    Ray ray;
    Vec3 inv_dir;

    explicit TraversalRay(const Ray &r)
        : ray(r), inv_dir(1.0 / r.direction.x, 1.0 / r.direction.y, 1.0 / r.direction.z) {}
};

// Slab test against [t_min, t_max], padded by a few ulps so that primitives
// lying on a box face are never culled.
inline bool node_overlap(const Aabb &b, const TraversalRay &r, double t_min, double t_max, double &t_enter) {
    double t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double tn = (b.min[a] - r.ray.origin[a]) * r.inv_dir[a];
        double tf = (b.max[a] - r.ray.origin[a]) * r.inv_dir[a];
        if (tn > tf) std::swap(tn, tf);
        tf += std::abs(tf) * 4e-15;
        t0 = tn > t0 ? tn : t0;
        t1 = tf < t1 ? tf : t1;
        if (t0 > t1) return false;
    }
    t_enter = t0;
    return true;
}

/// Closest-hit traversal. `leaf(prim, t_max)` tests one primitive and shrinks
/// t_max on a hit.
template <typename LeafFn>
void traverse_closest(const Bvh &bvh, const TraversalRay &r, double t_min, double &t_max, LeafFn &&leaf) {
    if (bvh.empty()) return;
    double t_root;
    if (!node_overlap(bvh.nodes[0].bounds, r, t_min, t_max, t_root)) return;
    std::array<uint32_t, 128> stack;
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const BvhNode &node = bvh.nodes[stack[--sp]];
        double t_node;
        if (!node_overlap(node.bounds, r, t_min, t_max, t_node)) continue;
        if (node.is_leaf()) {
            for (uint32_t i = 0; i < node.prim_count; ++i) leaf(bvh.prim_order[node.left_or_first + i], t_max);
            continue;
        }
        double tl, tr;
        bool hl = node_overlap(bvh.nodes[node.left_or_first].bounds, r, t_min, t_max, tl);
        bool hr = node_overlap(bvh.nodes[node.right].bounds, r, t_min, t_max, tr);
        if (hl && hr) {
            // Push the far child first so the near one is popped next.
            if (tl <= tr) {
                stack[sp++] = node.right;
                stack[sp++] = node.left_or_first;
            } else {
                stack[sp++] = node.left_or_first;
                stack[sp++] = node.right;
            }
        } else if (hl) {
            stack[sp++] = node.left_or_first;
        } else if (hr) {
            stack[sp++] = node.right;
        }
        if (sp + 2 > static_cast<int>(stack.size())) throw Error("BVH traversal stack overflow");
    }
}

/// Any-hit traversal; stops as soon as `leaf(prim)` returns true.
template <typename LeafFn>
bool traverse_any(const Bvh &bvh, const TraversalRay &r, double t_min, double t_max, LeafFn &&leaf) {
    if (bvh.empty()) return false;
    std::array<uint32_t, 128> stack;
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const BvhNode &node = bvh.nodes[stack[--sp]];
        double t_node;
        if (!node_overlap(node.bounds, r, t_min, t_max, t_node)) continue;
        if (node.is_leaf()) {
            for (uint32_t i = 0; i < node.prim_count; ++i)
                if (leaf(bvh.prim_order[node.left_or_first + i])) return true;
            continue;
        }
        stack[sp++] = node.right;
        stack[sp++] = node.left_or_first;
        if (sp + 2 > static_cast<int>(stack.size())) throw Error("BVH traversal stack overflow");
    }
    return false;
}

/// Calls `visit(prim)` for every leaf primitive whose node boxes overlap the
/// segment. Used by the gather pass over the top-level tree.
template <typename VisitFn>
void traverse_all(const Bvh &bvh, const TraversalRay &r, double t_min, double t_max, VisitFn &&visit) {
    traverse_any(bvh, r, t_min, t_max, [&](uint32_t prim) {
        visit(prim);
        return false;
    });
}

/// Calls `visit(prim)` for every leaf primitive whose node boxes contain `p`
/// within `tol`.
template <typename VisitFn>
void traverse_point(const Bvh &bvh, const Vec3 &p, double tol, VisitFn &&visit) {
    if (bvh.empty()) return;
    std::array<uint32_t, 128> stack;
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const BvhNode &node = bvh.nodes[stack[--sp]];
        if (!node.bounds.contains(p, tol)) continue;
        if (node.is_leaf()) {
            for (uint32_t i = 0; i < node.prim_count; ++i) visit(bvh.prim_order[node.left_or_first + i]);
            continue;
        }
        stack[sp++] = node.right;
        stack[sp++] = node.left_or_first;
        if (sp + 2 > static_cast<int>(stack.size())) throw Error("BVH traversal stack overflow");
    }
}

}  // namespace nif
