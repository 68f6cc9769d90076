// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Scene container with two-level acceleration: one BVH per object over its
// triangles and a top-level BVH over the object boxes.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nif/bvh.hpp"
#include "nif/geometry.hpp"
#include "nif/image.hpp"
#include "nif/lights.hpp"

namespace nif {

struct Camera {
    Vec3 position{0, -5, 1};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 0, 1};
    double vertical_fov = 40.0;  // degrees
    int width = 512;
    int height = 288;

    /// Ray through image position (px, py) in pixel units, row 0 at the top.
    Ray generate_ray(double px, double py) const {
        Vec3 forward = normalize(look_at - position);
        Vec3 right = normalize(cross(forward, up));
        Vec3 true_up = cross(right, forward);
        double tan_half = std::tan(vertical_fov * std::numbers::pi / 360.0);
        double aspect = double(width) / double(height);
        double sx = (2.0 * px / width - 1.0) * tan_half * aspect;
        double sy = (1.0 - 2.0 * py / height) * tan_half;
        return {position, normalize(forward + right * sx + true_up * sy)};
    }

    void validate() const {
        if (!(vertical_fov > 0 && vertical_fov < 180)) throw Error("camera: vertical_fov must be in (0, 180)");
        if (width <= 0 || height <= 0) throw Error("camera: resolution must be positive");
        if (!(length(look_at - position) > 0)) throw Error("camera: look_at equals position");
        if (!(length(cross(normalize(look_at - position), up)) > 1e-9)) throw Error("camera: up is parallel to view");
    }
};

struct Object {
    std::string name;
    std::vector<Triangle> triangles;
    Bvh bvh;
    Aabb bounds;
    Rgb albedo{0.8, 0.8, 0.8};
    bool nif_enabled = true;
};

struct HitRecord {
    double t = 0;
    uint32_t object_id = 0;
    uint32_t triangle_id = 0;
    Vec3 shading_normal;
    Vec3 hit_point;
};

struct Scene {
    std::vector<Object> objects;
    Bvh top;
    std::vector<Aabb> object_bounds;
    std::vector<Light> lights;
    Camera camera;
    uint64_t seed = 0;
    Aabb bounds;
    double epsilon_t = 1e-4;

    /// Object boxes grow by this fraction of their diagonal (at least the
    /// shadow epsilon) so that flat objects still have a usable volume.
    static constexpr double kMinBoxThickness = 1e-4;

    Object &add_object(std::vector<Triangle> tris, Rgb albedo = Rgb{0.8}, bool nif_enabled = true,
                       std::string name = {}) {
        Object obj;
        obj.name = std::move(name);
        obj.albedo = albedo;
        obj.nif_enabled = nif_enabled;
        obj.triangles.reserve(tris.size());
        for (Triangle &t : tris)
            if (!is_degenerate(t)) obj.triangles.push_back(t);
        if (obj.triangles.empty()) throw Error("scene object '" + obj.name + "' has no valid triangles");
        objects.push_back(std::move(obj));
        return objects.back();
    }

    /// Builds all acceleration structures and derived quantities.
    void build() {
        bounds = Aabb{};
        object_bounds.clear();
        for (Object &obj : objects) {
            obj.bvh = build_bottom(obj.triangles);
            Aabb b = obj.bvh.bounds();
            // Pad degenerate (flat) extents so every box has volume.
            double pad = kMinBoxThickness * std::max(b.diagonal(), 1e-12);
            Vec3 e = b.extent();
            for (int a = 0; a < 3; ++a)
                if (e[a] < pad) {
                    b.min[a] -= pad;
                    b.max[a] += pad;
                }
            obj.bounds = b;
            object_bounds.push_back(b);
            bounds.expand(b);
        }
        top = objects.empty() ? Bvh{} : build_top(object_bounds);
        epsilon_t = objects.empty() ? 1e-4 : 1e-4 * bounds.diagonal();
    }

    double diagonal() const { return bounds.diagonal(); }
    double radius() const { return objects.empty() ? 1.0 : 0.5 * bounds.diagonal(); }
    size_t triangle_count() const {
        size_t n = 0;
        for (const Object &o : objects) n += o.triangles.size();
        return n;
    }
};

/// Closest hit within one object's triangles, t in (t_min, t_max).
inline bool intersect_object(const Object &obj, const TraversalRay &r, double t_min, double &t_max, uint32_t object_id,
                             HitRecord &rec) {
    bool found = false;
    traverse_closest(obj.bvh, r, t_min, t_max, [&](uint32_t prim, double &tmax) {
        if (auto h = ray_triangle_intersect(r.ray, obj.triangles[prim], t_min, tmax)) {
            tmax = h->t;
            found = true;
            rec.t = h->t;
            rec.object_id = object_id;
            rec.triangle_id = prim;
            rec.shading_normal = interpolate_normal(obj.triangles[prim], h->b1, h->b2);
        }
    });
    return found;
}

inline std::optional<HitRecord> trace_closest(const Scene &scene, const Ray &ray) {
    if (scene.objects.empty()) return std::nullopt;
    TraversalRay r(ray);
    double t_max = std::numeric_limits<double>::infinity();
    HitRecord rec;
    bool found = false;
    traverse_closest(scene.top, r, scene.epsilon_t, t_max, [&](uint32_t obj, double &tmax) {
        if (intersect_object(scene.objects[obj], r, scene.epsilon_t, tmax, obj, rec)) found = true;
    });
    if (!found) return std::nullopt;
    rec.hit_point = ray.at(rec.t);
    return rec;
}

/// Any hit on one object with t in (t_min, t_max). This is the ground-truth
/// labeler for network training.
inline bool trace_occluded_by_object(const Object &obj, const Ray &ray, double t_max, double t_min) {
    TraversalRay r(ray);
    return traverse_any(obj.bvh, r, t_min, t_max, [&](uint32_t prim) {
        return ray_triangle_intersect(ray, obj.triangles[prim], t_min, t_max).has_value();
    });
}

inline bool trace_occluded_by_object(const Scene &scene, uint32_t object_id, const Ray &ray, double t_max) {
    return trace_occluded_by_object(scene.objects.at(object_id), ray, t_max, scene.epsilon_t);
}

inline bool trace_occluded(const Scene &scene, const Ray &ray, double t_max) {
    if (scene.objects.empty()) return false;
    TraversalRay r(ray);
    return traverse_any(scene.top, r, scene.epsilon_t, t_max, [&](uint32_t obj) {
        return trace_occluded_by_object(scene.objects[obj], ray, t_max, scene.epsilon_t);
    });
}

}  // namespace nif
