// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Progressive direct-illumination renderer. Each pixel sample traces one
// primary ray with the BVH, picks one light by flux, and casts one shadow ray
// whose visibility comes from a pluggable backend:
//
//   bvh     full two-level BVH traversal
//   nif     top-level traversal gathers network queries (phase 1), then
//           batched inference resolves them (phase 2)
//   hybrid  as nif, but objects below a triangle threshold stay on their BVH
//   custom  caller-provided any-hit predicate (test oracles)

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "nif/error.hpp"
#include "nif/image.hpp"
#include "nif/lights.hpp"
#include "nif/nif_model.hpp"
#include "nif/parallel.hpp"
#include "nif/rng.hpp"
#include "nif/scene.hpp"
#include "nif/timer.hpp"

namespace nif {

enum class BackendMode { bvh, nif, hybrid, custom };
enum class ShadowSampler { importance, uniform };

inline const char *to_string(BackendMode m) {
    switch (m) {
    case BackendMode::bvh: return "bvh";
    case BackendMode::nif: return "nif";
    case BackendMode::hybrid: return "hybrid";
    case BackendMode::custom: return "custom";
    }
    return "?";
}

inline const char *to_string(ShadowSampler s) { return s == ShadowSampler::importance ? "importance" : "uniform"; }

/// One shadow segment (t_min = scene epsilon, t_max) and the radiance it
/// carries if unoccluded.
struct ShadowRay {
    Ray ray;
    double t_max = 0;
    Rgb weight;
    uint32_t pixel = 0;
};

/// Result of tracing one pixel sample up to (but excluding) its visibility test.
struct PixelSample {
    Rgb emitted;  // radiance reaching the camera without a shadow test
    bool has_shadow = false;
    ShadowRay shadow;
    std::optional<HitRecord> hit;
};

/// Light-selection table and per-sample routine shared by rendering and
/// training-sample collection so both see identical rays.
class ShadingContext {
  public:
    ShadingContext(const Scene &scene, const Camera &camera) : scene_(scene), camera_(camera) {
        camera.validate();
        if (!scene.lights.empty()) {
            bool any = false;
            for (const Light &l : scene.lights) any |= light_flux(l, scene.radius()) > 0;
            if (any) light_cdf_ = build_light_cdf(scene.lights, scene.radius());
        }
        for (const Light &l : scene.lights)
            if (auto *env = std::get_if<EnvironmentLight>(&l)) environment_ = env;
    }

    const TabledCdf &light_cdf() const { return light_cdf_; }
    const Camera &camera() const { return camera_; }

    PixelSample sample(uint32_t pixel, uint32_t sample_index, uint64_t seed, ShadowSampler sampler,
                       bool jitter = true) const {
        Sampler rng(seed, pixel, sample_index);
        const int px = int(pixel % uint32_t(camera_.width)), py = int(pixel / uint32_t(camera_.width));
        Sampler::Pair j = rng.next_2d();
        if (!jitter) j = {0.5, 0.5};
        Ray primary = camera_.generate_ray(px + j.u, py + j.v);
        const double u_light = rng.next_1d();
        const Sampler::Pair u_dir = rng.next_2d();

        PixelSample out;
        out.hit = trace_closest(scene_, primary);
        if (!out.hit) {
            if (environment_) out.emitted = environment_->lookup(primary.direction);
            return out;
        }
        const HitRecord &hit = *out.hit;
        Vec3 n = hit.shading_normal;
        if (dot(n, primary.direction) > 0) n = -n;

        Vec3 dir;
        double t_max, pdf;
        Rgb radiance;
        if (sampler == ShadowSampler::uniform) {
            DirectionSample ds = sample_uniform_dir(u_dir);
            dir = ds.direction;
            t_max = std::numeric_limits<double>::infinity();
            pdf = ds.pdf;
            radiance = environment_ ? environment_->lookup(dir) : Rgb{};
        } else {
            if (light_cdf_.size() == 0) return out;
            const size_t li = sample_cdf(light_cdf_, u_light);
            auto ls = sample_light_dir(hit.hit_point, scene_.lights[li], u_dir);
            if (!ls) return out;
            dir = ls->direction;
            t_max = ls->t_max;
            pdf = ls->pdf * light_cdf_.pmf[li];
            radiance = ls->radiance;
        }
        const double cos_theta = dot(n, dir);
        if (!(cos_theta > 0) || !(pdf > 0)) return out;
        const Rgb albedo = scene_.objects[hit.object_id].albedo;
        out.has_shadow = true;
        out.shadow.ray = {hit.hit_point, dir};
        out.shadow.t_max = t_max;
        out.shadow.weight = albedo * radiance * (cos_theta / (std::numbers::pi * pdf));
        out.shadow.pixel = pixel;
        return out;
    }

  private:
    const Scene &scene_;
    Camera camera_;
    TabledCdf light_cdf_;
    const EnvironmentLight *environment_ = nullptr;
};

/// Per-object routing: 1 when the object is answered by the networks.
inline std::vector<uint8_t> nif_routing(const Scene &scene, BackendMode mode, size_t hybrid_threshold) {
    std::vector<uint8_t> route(scene.objects.size(), 0);
    if (mode != BackendMode::nif && mode != BackendMode::hybrid) return route;
    for (size_t k = 0; k < scene.objects.size(); ++k) {
        const Object &o = scene.objects[k];
        route[k] = o.nif_enabled && (mode == BackendMode::nif || o.triangles.size() >= hybrid_threshold);
    }
    return route;
}

/// Network queries gathered for a set of shadow rays.
struct QueryBatch {
    std::vector<OuterQuery> outer;
    std::vector<uint32_t> outer_ray;
    std::vector<InnerQuery> inner;
    std::vector<uint32_t> inner_ray;

    void append(QueryBatch &&o, uint32_t ray_offset = 0) {
        outer.insert(outer.end(), o.outer.begin(), o.outer.end());
        inner.insert(inner.end(), o.inner.begin(), o.inner.end());
        for (uint32_t r : o.outer_ray) outer_ray.push_back(r + ray_offset);
        for (uint32_t r : o.inner_ray) inner_ray.push_back(r + ray_offset);
    }
};

/// Top-level traversal of one shadow segment. For each network-routed object
/// box containing the origin (within epsilon) emits an inner query; for each
/// box the segment enters from outside emits an outer query. Objects not
/// routed to networks are tested against their own BVH; returns true if one
/// of them occludes the segment.
template <typename OuterFn, typename InnerFn>
bool gather_queries(const Scene &scene, const Ray &ray, double t_max, std::span<const uint8_t> route, OuterFn &&on_outer,
                    InnerFn &&on_inner) {
    if (scene.objects.empty()) return false;
    const double eps = scene.epsilon_t;
    // A separate point query: an origin just outside a box (within epsilon)
    // and heading away would never be reached by the segment traversal.
    traverse_point(scene.top, ray.origin, eps, [&](uint32_t obj) {
        if (route[obj] && scene.object_bounds[obj].contains(ray.origin, eps))
            on_inner(transform_inner(ray.origin, ray.direction, scene.object_bounds[obj], obj));
    });
    TraversalRay r(ray);
    bool bvh_hit = false;
    traverse_all(scene.top, r, 0.0, t_max, [&](uint32_t obj) {
        const Aabb &box = scene.object_bounds[obj];
        if (!route[obj]) {
            if (!bvh_hit) bvh_hit = trace_occluded_by_object(scene.objects[obj], ray, t_max, eps);
            return;
        }
        if (box.contains(ray.origin, eps)) return;
        // An origin outside the box (beyond epsilon) has t_enter > 0 on a hit.
        auto slab = ray_aabb_intersect(ray, box);
        if (!slab || !(slab->t_enter > 0) || !(slab->t_enter < t_max)) return;
        on_outer(transform_outer_at(ray, box, slab->t_enter, obj));
    });
    return bvh_hit;
}

/// Phase 2 evaluator: decides occlusion for gathered queries.
class QueryEvaluator {
  public:
    virtual ~QueryEvaluator() = default;
    virtual NifModel::OcclusionBits evaluate(const QueryBatch &queries, std::span<const ShadowRay> rays,
                                             InferenceTimes *times) const = 0;
};

/// Batched network inference.
class NifEvaluator : public QueryEvaluator {
  public:
    explicit NifEvaluator(const NifModel &model) : model_(model) {}
    NifModel::OcclusionBits evaluate(const QueryBatch &q, std::span<const ShadowRay>,
                                     InferenceTimes *times) const override {
        return model_.infer_occlusion(q.outer, q.inner, times);
    }

  private:
    const NifModel &model_;
};

/// Stand-in for the networks that answers each query exactly from the
/// object's BVH. Isolates pipeline plumbing from learning quality.
class OracleEvaluator : public QueryEvaluator {
  public:
    explicit OracleEvaluator(const Scene &scene) : scene_(scene) {}
    NifModel::OcclusionBits evaluate(const QueryBatch &q, std::span<const ShadowRay> rays,
                                     InferenceTimes *) const override {
        NifModel::OcclusionBits bits;
        bits.outer.resize(q.outer.size());
        bits.inner.resize(q.inner.size());
        parallel_for(q.outer.size(), [&](size_t k) {
            const ShadowRay &s = rays[q.outer_ray[k]];
            bits.outer[k] = trace_occluded_by_object(scene_, q.outer[k].object_id, s.ray, s.t_max);
        });
        parallel_for(q.inner.size(), [&](size_t k) {
            const ShadowRay &s = rays[q.inner_ray[k]];
            bits.inner[k] = trace_occluded_by_object(scene_, q.inner[k].object_id, s.ray, s.t_max);
        });
        return bits;
    }

  private:
    const Scene &scene_;
};

struct NifPassStats {
    double top_level_us = 0;
    InferenceTimes inference;
    size_t outer_queries = 0, inner_queries = 0;
};

inline constexpr size_t kGatherChunk = 4096;

/// Phase 1 over all rays, merged in ray order.
inline std::pair<QueryBatch, std::vector<uint8_t>> gather_pass(const Scene &scene, std::span<const ShadowRay> rays,
                                                                std::span<const uint8_t> route) {
    const size_t chunks = (rays.size() + kGatherChunk - 1) / kGatherChunk;
    std::vector<QueryBatch> parts(chunks);
    std::vector<uint8_t> bvh_occluded(rays.size(), 0);
    parallel_for(chunks, [&](size_t c) {
        const size_t begin = c * kGatherChunk, end = std::min(rays.size(), begin + kGatherChunk);
        QueryBatch &part = parts[c];
        for (size_t i = begin; i < end; ++i) {
            const uint32_t id = uint32_t(i);
            bvh_occluded[i] = gather_queries(
                scene, rays[i].ray, rays[i].t_max, route,
                [&](const OuterQuery &q) {
                    part.outer.push_back(q);
                    part.outer_ray.push_back(id);
                },
                [&](const InnerQuery &q) {
                    part.inner.push_back(q);
                    part.inner_ray.push_back(id);
                });
        }
    });
    QueryBatch all;
    for (auto &p : parts) all.append(std::move(p));
    return {std::move(all), std::move(bvh_occluded)};
}

/// Two-stage network visibility for a batch of shadow rays. A ray is
/// shadowed if any overlapped object reports occlusion.
inline std::vector<uint8_t> shade_pass_nif(const Scene &scene, std::span<const ShadowRay> rays,
                                           std::span<const uint8_t> route, const QueryEvaluator &evaluator,
                                           NifPassStats *stats = nullptr) {
    Timer t;
    auto [queries, occluded] = gather_pass(scene, rays, route);
    const double top_us = t.microseconds();
    InferenceTimes times;
    NifModel::OcclusionBits bits;
    if (!queries.outer.empty() || !queries.inner.empty()) bits = evaluator.evaluate(queries, rays, &times);
    for (size_t k = 0; k < bits.outer.size(); ++k)
        if (bits.outer[k]) occluded[queries.outer_ray[k]] = 1;
    for (size_t k = 0; k < bits.inner.size(); ++k)
        if (bits.inner[k]) occluded[queries.inner_ray[k]] = 1;
    if (stats) {
        stats->top_level_us += top_us;
        stats->inference.outer_grid_us += times.outer_grid_us;
        stats->inference.outer_inference_us += times.outer_inference_us;
        stats->inference.inner_grid_us += times.inner_grid_us;
        stats->inference.inner_inference_us += times.inner_inference_us;
        stats->outer_queries += queries.outer.size();
        stats->inner_queries += queries.inner.size();
    }
    return occluded;
}

struct VisibilityBackend {
    BackendMode mode = BackendMode::bvh;
    size_t hybrid_threshold = 10000;
    const NifModel *model = nullptr;
    const QueryEvaluator *evaluator = nullptr;  // overrides `model` when set
    std::function<bool(const Ray &, double t_max)> any_hit;  // custom mode
};

struct RenderConfig {
    int spp = 16;
    uint32_t first_sample = 0;
    uint64_t seed = 0;
    bool jitter = true;
};

struct RenderStats {
    double primary_seconds = 0;
    double visibility_seconds = 0;
    size_t shadow_rays = 0;
    NifPassStats nif;
};

inline HdrImage render(const Scene &scene, const Camera &camera, const RenderConfig &config,
                       const VisibilityBackend &backend, RenderStats *stats = nullptr) {
    if (config.spp < 0) throw Error("render: spp must be >= 0");
    const bool uses_nif = backend.mode == BackendMode::nif || backend.mode == BackendMode::hybrid;
    std::optional<NifEvaluator> nif_eval;
    const QueryEvaluator *evaluator = backend.evaluator;
    if (uses_nif && !evaluator) {
        if (!backend.model || !backend.model->trained()) throw Error("render: nif backend requires a trained model");
        if (backend.model->config().head != Head::occlusion) throw Error("render: model does not have an occlusion head");
        if (backend.model->object_count() != scene.objects.size())
            throw Error("render: model object count does not match the scene");
        nif_eval.emplace(*backend.model);
        evaluator = &*nif_eval;
    }
    if (backend.mode == BackendMode::custom && !backend.any_hit) throw Error("render: custom backend needs any_hit");

    ShadingContext ctx(scene, camera);
    const std::vector<uint8_t> route = nif_routing(scene, backend.mode, backend.hybrid_threshold);
    HdrImage image(camera.width, camera.height);
    const size_t pixels = image.pixel_count();
    std::vector<PixelSample> samples(pixels);
    std::vector<ShadowRay> rays;
    std::vector<uint8_t> occluded;
    RenderStats local;

    for (int s = 0; s < config.spp; ++s) {
        const uint32_t index = config.first_sample + uint32_t(s);
        Timer t;
        parallel_for((pixels + 255) / 256, [&](size_t c) {
            const size_t end = std::min(pixels, (c + 1) * 256);
            for (size_t p = c * 256; p < end; ++p)
                samples[p] = ctx.sample(uint32_t(p), index, config.seed, ShadowSampler::importance, config.jitter);
        });
        rays.clear();
        for (const PixelSample &ps : samples)
            if (ps.has_shadow) rays.push_back(ps.shadow);
        local.primary_seconds += t.seconds();
        local.shadow_rays += rays.size();

        t.reset();
        occluded.assign(rays.size(), 0);
        switch (backend.mode) {
        case BackendMode::bvh:
            parallel_for(rays.size(), [&](size_t i) { occluded[i] = trace_occluded(scene, rays[i].ray, rays[i].t_max); });
            break;
        case BackendMode::custom:
            parallel_for(rays.size(), [&](size_t i) { occluded[i] = backend.any_hit(rays[i].ray, rays[i].t_max); });
            break;
        case BackendMode::nif:
        case BackendMode::hybrid:
            occluded = shade_pass_nif(scene, rays, route, *evaluator, &local.nif);
            break;
        }
        local.visibility_seconds += t.seconds();

        for (size_t p = 0; p < pixels; ++p) image.add(p, samples[p].emitted);
        for (size_t i = 0; i < rays.size(); ++i)
            if (!occluded[i]) image.add(rays[i].pixel, rays[i].weight);
        image.finish_pass();
    }
    if (stats) *stats = local;
    return image;
}

}  // namespace nif
