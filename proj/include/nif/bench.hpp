// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Visibility timing on a fixed shadow-ray set: full BVH occlusion against the
// staged network pipeline, each stage reported as a median over repeats.

#include <string>
#include <vector>

#include "nif/renderer.hpp"
#include "nif/scene_io.hpp"
#include "nif/timer.hpp"
#include "nif/training.hpp"

namespace nif {

struct BenchOptions {
    int spp = 4;
    uint64_t seed = 0;
    int warmup = 1;
    int repeats = 5;
};

/// Shadow rays of `spp` importance-sampled pixel-sample passes.
inline std::vector<ShadowRay> bench_rays(const Scene &scene, const Camera &camera, int spp, uint64_t seed) {
    ShadingContext ctx(scene, camera);
    std::vector<ShadowRay> rays;
    for (int s = 0; s < spp; ++s) {
        auto pass = shadow_rays_for_pass(ctx, uint32_t(s), seed, ShadowSampler::importance, true);
        rays.insert(rays.end(), pass.begin(), pass.end());
    }
    return rays;
}

inline BenchRow bench_visibility(const std::string &name, const Scene &scene, std::span<const ShadowRay> rays,
                                 const NifModel &model, const BenchOptions &opt) {
    if (opt.repeats < 1 || opt.warmup < 0) throw Error("bench: repeats must be >= 1 and warmup >= 0");
    BenchRow row;
    row.scene = name;
    row.triangles = scene.triangle_count();
    row.shadow_rays = rays.size();

    std::vector<uint8_t> occluded(rays.size());
    std::vector<double> bvh_us;
    for (int k = 0; k < opt.warmup + opt.repeats; ++k) {
        Timer t;
        parallel_for(rays.size(), [&](size_t i) { occluded[i] = trace_occluded(scene, rays[i].ray, rays[i].t_max); });
        if (k >= opt.warmup) bvh_us.push_back(t.microseconds());
    }

    const std::vector<uint8_t> route = nif_routing(scene, BackendMode::nif, 0);
    NifEvaluator evaluator(model);
    std::vector<double> top, og, oi, ig, ii;
    for (int k = 0; k < opt.warmup + opt.repeats; ++k) {
        NifPassStats st;
        shade_pass_nif(scene, rays, route, evaluator, &st);
        if (k < opt.warmup) continue;
        top.push_back(st.top_level_us);
        og.push_back(st.inference.outer_grid_us);
        oi.push_back(st.inference.outer_inference_us);
        ig.push_back(st.inference.inner_grid_us);
        ii.push_back(st.inference.inner_inference_us);
        row.outer_rays = st.outer_queries;
        row.inner_rays = st.inner_queries;
    }
    row.bvh_ray_cast_us = median(bvh_us);
    row.nif_ray_cast_us = median(top);
    row.outer_grid_us = median(og);
    row.outer_inference_us = median(oi);
    row.inner_grid_us = median(ig);
    row.inner_inference_us = median(ii);
    row.finalize();
    return row;
}

}  // namespace nif
