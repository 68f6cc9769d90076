// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Training-set collection. Samples are the shadow rays the renderer itself
// would cast for the first few pixel samples, decomposed into outer/inner
// queries per network-routed object and labelled by that object's BVH.

#include <cstdint>
#include <functional>
#include <vector>

#include "nif/nif_model.hpp"
#include "nif/renderer.hpp"

namespace nif {

struct CollectOptions {
    int spp = 4;
    uint32_t first_sample = 0;
    uint64_t seed = 0;
    ShadowSampler sampler = ShadowSampler::importance;
    BackendMode routing = BackendMode::nif;
    size_t hybrid_threshold = 10000;
    bool jitter = true;
};

/// Exact per-object occlusion of a shadow segment: true = occluded.
using QueryLabeler = std::function<bool(uint32_t object_id, const Ray &, double t_max)>;

inline QueryLabeler bvh_labeler(const Scene &scene) {
    return [&scene](uint32_t obj, const Ray &ray, double t_max) {
        return trace_occluded_by_object(scene, obj, ray, t_max);
    };
}

/// Generates the shadow rays of one pixel-sample pass, in pixel order.
inline std::vector<ShadowRay> shadow_rays_for_pass(const ShadingContext &ctx, uint32_t sample_index, uint64_t seed,
                                                   ShadowSampler sampler, bool jitter) {
    const Camera &cam = ctx.camera();
    const size_t pixels = size_t(cam.width) * cam.height;
    std::vector<PixelSample> samples(pixels);
    parallel_for((pixels + 255) / 256, [&](size_t c) {
        const size_t end = std::min(pixels, (c + 1) * 256);
        for (size_t p = c * 256; p < end; ++p) samples[p] = ctx.sample(uint32_t(p), sample_index, seed, sampler, jitter);
    });
    std::vector<ShadowRay> rays;
    for (const PixelSample &s : samples)
        if (s.has_shadow) rays.push_back(s.shadow);
    return rays;
}

/// Occlusion training samples. Label 1 = visible, 0 = occluded.
inline SampleSet collect_samples(const Scene &scene, const Camera &camera, const CollectOptions &opt,
                                 const QueryLabeler &labeler) {
    if (opt.spp < 0) throw Error("collect_samples: spp must be >= 0");
    if (scene.lights.empty()) throw Error("collect_samples: scene has no lights");
    ShadingContext ctx(scene, camera);
    const BackendMode routing = opt.routing == BackendMode::hybrid ? BackendMode::hybrid : BackendMode::nif;
    const std::vector<uint8_t> route = nif_routing(scene, routing, opt.hybrid_threshold);
    SampleSet set;
    for (int s = 0; s < opt.spp; ++s) {
        std::vector<ShadowRay> rays =
            shadow_rays_for_pass(ctx, opt.first_sample + uint32_t(s), opt.seed, opt.sampler, opt.jitter);
        set.shadow_rays += rays.size();
        auto [queries, bvh_hits] = gather_pass(scene, rays, route);
        (void)bvh_hits;
        const size_t o0 = set.outer.size(), i0 = set.inner.size();
        set.outer.resize(o0 + queries.outer.size());
        set.inner.resize(i0 + queries.inner.size());
        parallel_for(queries.outer.size(), [&](size_t k) {
            const ShadowRay &r = rays[queries.outer_ray[k]];
            const bool occ = labeler(queries.outer[k].object_id, r.ray, r.t_max);
            set.outer[o0 + k] = {queries.outer[k], {occ ? 0.f : 1.f, 0, 0, 0}};
        });
        parallel_for(queries.inner.size(), [&](size_t k) {
            const ShadowRay &r = rays[queries.inner_ray[k]];
            const bool occ = labeler(queries.inner[k].object_id, r.ray, r.t_max);
            set.inner[i0 + k] = {queries.inner[k], {occ ? 0.f : 1.f, 0, 0, 0}};
        });
    }
    return set;
}

inline SampleSet collect_samples(const Scene &scene, const Camera &camera, const CollectOptions &opt) {
    return collect_samples(scene, camera, opt, bvh_labeler(scene));
}

/// Geometry-head samples from primary rays: for each network-routed object
/// box the camera ray enters from outside and whose object it hits, the
/// label is (shading normal, (t_hit - t_enter) / scene diagonal).
inline SampleSet collect_geometry_samples(const Scene &scene, const Camera &camera, const CollectOptions &opt) {
    if (opt.spp < 0) throw Error("collect_geometry_samples: spp must be >= 0");
    camera.validate();
    const std::vector<uint8_t> route = nif_routing(scene, BackendMode::nif, 0);
    const double diag = scene.diagonal() > 0 ? scene.diagonal() : 1.0;
    const size_t pixels = size_t(camera.width) * camera.height;
    SampleSet set;
    for (int s = 0; s < opt.spp; ++s) {
        const uint32_t index = opt.first_sample + uint32_t(s);
        const size_t chunks = (pixels + 255) / 256;
        std::vector<std::vector<OuterSample>> parts(chunks);
        parallel_for(chunks, [&](size_t c) {
            const size_t end = std::min(pixels, (c + 1) * 256);
            for (size_t p = c * 256; p < end; ++p) {
                Sampler rng(opt.seed, uint32_t(p), index);
                Sampler::Pair j = rng.next_2d();
                if (!opt.jitter) j = {0.5, 0.5};
                const Ray ray = camera.generate_ray(int(p % camera.width) + j.u, int(p / camera.width) + j.v);
                const TraversalRay tr(ray);
                for (uint32_t obj = 0; obj < scene.objects.size(); ++obj) {
                    if (!route[obj]) continue;
                    const Aabb &box = scene.object_bounds[obj];
                    if (box.contains(ray.origin, scene.epsilon_t)) continue;
                    auto slab = ray_aabb_intersect(ray, box);
                    if (!slab || !(slab->t_enter > 0)) continue;
                    double t_max = std::numeric_limits<double>::infinity();
                    HitRecord hit;
                    if (!intersect_object(scene.objects[obj], tr, scene.epsilon_t, t_max, obj, hit)) continue;
                    const Vec3 n = hit.shading_normal;
                    parts[c].push_back({transform_outer_at(ray, box, slab->t_enter, obj),
                                        {float(n.x), float(n.y), float(n.z), float((hit.t - slab->t_enter) / diag)}});
                }
            }
        });
        for (auto &p : parts) set.outer.insert(set.outer.end(), p.begin(), p.end());
        set.shadow_rays += pixels;
    }
    return set;
}

struct TrainedModel {
    NifModel model;
    TrainingReport report;
    size_t outer_samples = 0, inner_samples = 0, shadow_rays = 0;
};

/// Collects samples for the configured head and trains for config.epochs.
inline TrainedModel train_nif(const Scene &scene, const Camera &camera, const NifConfig &config,
                              const CollectOptions &collect, uint64_t seed) {
    if (scene.objects.empty()) throw Error("train: scene has no objects");
    SampleSet samples = config.head == Head::geometry ? collect_geometry_samples(scene, camera, collect)
                                                      : collect_samples(scene, camera, collect);
    TrainedModel out{NifModel(config, scene.objects.size(), seed), {}, samples.outer.size(), samples.inner.size(),
                     samples.shadow_rays};
    out.model.set_scene_diagonal(scene.diagonal());
    out.report = out.model.train(samples, config.epochs, seed);
    return out;
}

}  // namespace nif
