// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

// nif: render, train, eval, bench and sweep driver.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "nif/bench.hpp"
#include "nif/image_io.hpp"
#include "nif/renderer.hpp"
#include "nif/scene_io.hpp"
#include "nif/training.hpp"

namespace fs = std::filesystem;
using namespace nif;

namespace {

struct UsageError : Error {
    using Error::Error;
};

/// "WxH" -> (W, H).
std::pair<int, int> parse_res(const std::string &s) {
    int w = 0, h = 0;
    char x = 0, extra = 0;
    if (std::sscanf(s.c_str(), "%d%c%d%c", &w, &x, &h, &extra) != 3 || (x != 'x' && x != 'X') || w <= 0 || h <= 0)
        throw UsageError("--res must look like 512x288");
    return {w, h};
}

Camera scene_camera(const Scene &scene, const std::string &res) {
    Camera cam = scene.camera;
    if (!res.empty()) std::tie(cam.width, cam.height) = parse_res(res);
    return cam;
}

std::string strip_image_ext(const std::string &out) {
    fs::path p(out);
    if (p.extension() == ".png" || p.extension() == ".pfm") p.replace_extension();
    return p.string();
}

struct NetFlags {
    int outer_R = 256, outer_N = 3;
    int inner_R = 128, inner_N = 5, dist_R = 128, dist_N = 3;
    double lr = 0.005;
    int epochs = 30;
    std::string sharing = "shared", head = "occlusion";

    void add(CLI::App *app) {
        app->add_option("--grid-r", outer_R, "Outer feature grid resolution R")->check(CLI::PositiveNumber);
        app->add_option("--grid-n", outer_N, "Outer latent size N")->check(CLI::PositiveNumber);
        app->add_option("--inner-grid-r", inner_R, "Inner position/direction grid resolution")->check(CLI::PositiveNumber);
        app->add_option("--inner-grid-n", inner_N, "Inner position/direction latent size")->check(CLI::PositiveNumber);
        app->add_option("--dist-grid-r", dist_R, "Inner distance grid resolution")->check(CLI::PositiveNumber);
        app->add_option("--dist-grid-n", dist_N, "Inner distance latent size")->check(CLI::PositiveNumber);
        app->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
        app->add_option("--epochs", epochs, "Training epochs")->check(CLI::NonNegativeNumber);
        app->add_option("--sharing", sharing, "Network sharing")->check(CLI::IsMember({"shared", "per-object"}));
        app->add_option("--head", head, "Network output head")->check(CLI::IsMember({"occlusion", "geometry"}));
    }

    NifConfig config() const {
        NifConfig c;
        c.outer.grid_R = outer_R;
        c.outer.grid_N = outer_N;
        c.inner.pos_dir_grid_R = inner_R;
        c.inner.pos_dir_grid_N = inner_N;
        c.inner.dist_grid_R = dist_R;
        c.inner.dist_grid_N = dist_N;
        c.learning_rate = lr;
        c.epochs = epochs;
        c.sharing = sharing == "shared" ? Sharing::shared : Sharing::per_object;
        c.head = head == "occlusion" ? Head::occlusion : Head::geometry;
        c.validate();
        return c;
    }
};

BackendMode parse_backend(const std::string &s) {
    if (s == "bvh") return BackendMode::bvh;
    if (s == "nif") return BackendMode::nif;
    return BackendMode::hybrid;
}

std::string format_psnr(double db) {
    if (std::isinf(db)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", db);
    return buf;
}

void write_loss_csv(const TrainingReport &r, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << "epoch,loss,outer_loss,inner_loss\n";
    char buf[128];
    for (size_t e = 0; e < r.loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", e + 1, r.loss[e], r.outer_loss[e], r.inner_loss[e]);
        out << buf;
    }
}

// ---------------------------------------------------------------------------

struct RenderArgs {
    std::string scene, backend = "bvh", model, out = "render", res;
    int spp = 16;
    uint64_t seed = 0;
    bool seed_set = false;
    size_t hybrid_threshold = 10000;
};

int cmd_render(const RenderArgs &a) {
    const BackendMode mode = parse_backend(a.backend);
    if (mode != BackendMode::bvh && a.model.empty()) throw UsageError("--backend " + a.backend + " requires --model");
    Scene scene = load_scene(a.scene);
    Camera cam = scene_camera(scene, a.res);
    std::optional<NifModel> model;
    if (!a.model.empty() && mode != BackendMode::bvh) model = load_checkpoint(a.model);

    RenderConfig rc;
    rc.spp = a.spp;
    rc.seed = a.seed_set ? a.seed : scene.seed;
    VisibilityBackend backend;
    backend.mode = mode;
    backend.hybrid_threshold = a.hybrid_threshold;
    backend.model = model ? &*model : nullptr;
    RenderStats st;
    Timer t;
    HdrImage img = render(scene, cam, rc, backend, &st);
    const double total = t.seconds();

    const std::string base = strip_image_ext(a.out);
    save_image(img, base + ".png", ImageFormat::png8);
    save_image(img, base + ".pfm", ImageFormat::pfm);
    std::printf("rendered %dx%d, %d spp, backend %s\n", cam.width, cam.height, a.spp, a.backend.c_str());
    std::printf("  primary + shading   %10.3f s\n", st.primary_seconds);
    std::printf("  visibility          %10.3f s  (%zu shadow rays)\n", st.visibility_seconds, st.shadow_rays);
    if (mode != BackendMode::bvh) {
        const auto &n = st.nif;
        std::printf("    top-level cast    %10.0f us\n", n.top_level_us);
        std::printf("    outer grid        %10.0f us  (%zu queries)\n", n.inference.outer_grid_us, n.outer_queries);
        std::printf("    outer inference   %10.0f us\n", n.inference.outer_inference_us);
        std::printf("    inner grid        %10.0f us  (%zu queries)\n", n.inference.inner_grid_us, n.inner_queries);
        std::printf("    inner inference   %10.0f us\n", n.inference.inner_inference_us);
    }
    std::printf("  total               %10.3f s\n", total);
    std::printf("wrote %s.png and %s.pfm\n", base.c_str(), base.c_str());
    return 0;
}

struct TrainArgs {
    std::string scene, sampler = "importance", out = "model.nif", res;
    int train_spp = 4;
    uint64_t seed = 0;
    bool seed_set = false;
    NetFlags net;
};

int cmd_train(const TrainArgs &a) {
    const NifConfig cfg = a.net.config();
    Scene scene = load_scene(a.scene);
    Camera cam = scene_camera(scene, a.res);
    CollectOptions co;
    co.spp = a.train_spp;
    co.seed = a.seed_set ? a.seed : scene.seed;
    co.sampler = a.sampler == "importance" ? ShadowSampler::importance : ShadowSampler::uniform;
    TrainedModel tm = train_nif(scene, cam, cfg, co, co.seed);
    save_checkpoint(tm.model, a.out);
    const std::string loss_path = fs::path(a.out).replace_extension(".loss.csv").string();
    write_loss_csv(tm.report, loss_path);
    std::printf("collected %zu outer and %zu inner samples from %zu rays (%d spp, %s)\n", tm.outer_samples,
                tm.inner_samples, tm.shadow_rays, a.train_spp, a.sampler.c_str());
    std::printf("trained %d epochs in %.2f s, final loss %.6f\n", cfg.epochs, tm.report.seconds,
                tm.report.loss.empty() ? 0.0 : tm.report.loss.back());
    std::printf("wrote %s and %s\n", a.out.c_str(), loss_path.c_str());
    return 0;
}

struct EvalArgs {
    std::string a, b, out_diff;
    double amplify = 3.0;
};

int cmd_eval(const EvalArgs &a) {
    HdrImage ia = load_image(a.a), ib = load_image(a.b);
    const double db = psnr(ia, ib);
    std::printf("PSNR: %s dB\n", format_psnr(db).c_str());
    if (!a.out_diff.empty()) {
        write_png(error_image(ia, ib, a.amplify), a.out_diff);
        std::printf("wrote %s\n", a.out_diff.c_str());
    }
    return 0;
}

struct BenchArgs {
    std::vector<std::string> scenes;
    std::string model_dir = "models", out = "bench.csv", res;
    int spp = 4, train_spp = 4, repeats = 5;
    uint64_t seed = 0;
    NetFlags net;
};

int cmd_bench(const BenchArgs &a) {
    const NifConfig cfg = a.net.config();
    if (cfg.head != Head::occlusion) throw UsageError("bench needs the occlusion head");
    fs::create_directories(a.model_dir);
    std::vector<BenchRow> rows;
    for (const std::string &path : a.scenes) {
        Scene scene = load_scene(path);
        Camera cam = scene_camera(scene, a.res);
        const std::string name = fs::path(path).stem().string();
        const std::string model_path = (fs::path(a.model_dir) / (name + ".nif")).string();
        std::optional<NifModel> model;
        if (fs::exists(model_path)) {
            model = load_checkpoint(model_path);
        } else {
            CollectOptions co;
            co.spp = a.train_spp;
            co.seed = a.seed;
            model = train_nif(scene, cam, cfg, co, a.seed).model;
            save_checkpoint(*model, model_path);
            std::printf("%s: trained %s\n", name.c_str(), model_path.c_str());
        }
        if (model->object_count() != scene.objects.size()) throw Error(model_path + ": object count does not match " + path);
        std::vector<ShadowRay> rays = bench_rays(scene, cam, a.spp, a.seed);
        BenchOptions bo;
        bo.spp = a.spp;
        bo.seed = a.seed;
        bo.repeats = a.repeats;
        BenchRow row = bench_visibility(name, scene, rays, *model, bo);
        std::printf("%s: %llu tris, %llu rays, bvh %.0f us, nif %.0f us (speedup %.3f)\n", name.c_str(),
                    (unsigned long long)row.triangles, (unsigned long long)row.shadow_rays, row.bvh_ray_cast_us,
                    row.nif_total_us, row.speedup);
        rows.push_back(row);
    }
    write_bench_csv(rows, a.out);
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

struct SweepArgs {
    std::string scene, param, network = "outer", sampler = "importance", out = "sweep.csv", res;
    std::vector<int> values;
    int train_spp = 4, spp = 16;
    uint64_t seed = 0;
    bool seed_set = false;
    NetFlags net;
};

int cmd_sweep(const SweepArgs &a) {
    NifConfig base = a.net.config();
    if (base.head != Head::occlusion) throw UsageError("sweep needs the occlusion head");
    for (int v : a.values)
        if (v < 1) throw UsageError("--values must be positive integers");
    Scene scene = load_scene(a.scene);
    Camera cam = scene_camera(scene, a.res);
    const uint64_t seed = a.seed_set ? a.seed : scene.seed;
    RenderConfig rc;
    rc.spp = a.spp;
    rc.seed = seed;
    const HdrImage reference = render(scene, cam, rc, VisibilityBackend{});
    CollectOptions co;
    co.spp = a.train_spp;
    co.seed = seed;
    co.sampler = a.sampler == "importance" ? ShadowSampler::importance : ShadowSampler::uniform;

    std::ofstream out(a.out);
    if (!out) throw Error("cannot write '" + a.out + "'");
    out << "param,network,value,psnr_db,train_seconds\n";
    for (int v : a.values) {
        NifConfig cfg = base;
        const bool outer = a.network == "outer" || a.network == "both";
        const bool inner = a.network == "inner" || a.network == "both";
        if (a.param == "R") {
            if (outer) cfg.outer.grid_R = v;
            if (inner) cfg.inner.pos_dir_grid_R = cfg.inner.dist_grid_R = v;
        } else {
            if (outer) cfg.outer.grid_N = v;
            if (inner) cfg.inner.pos_dir_grid_N = cfg.inner.dist_grid_N = v;
        }
        TrainedModel tm = train_nif(scene, cam, cfg, co, seed);
        VisibilityBackend backend;
        backend.mode = BackendMode::nif;
        backend.model = &tm.model;
        const double db = psnr(render(scene, cam, rc, backend), reference);
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%s,%.3f\n", a.param.c_str(), a.network.c_str(), v,
                      format_psnr(db).c_str(), tm.report.seconds);
        out << buf;
        std::printf("%s=%d: PSNR %s dB (trained in %.2f s)\n", a.param.c_str(), v, format_psnr(db).c_str(),
                    tm.report.seconds);
    }
    std::printf("wrote %s\n", a.out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Neural intersection function renderer"};
    app.require_subcommand(1);

    RenderArgs ra;
    auto *render_cmd = app.add_subcommand("render", "Render a scene");
    render_cmd->add_option("--scene", ra.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--spp", ra.spp, "Samples per pixel")->check(CLI::PositiveNumber);
    render_cmd->add_option("--backend", ra.backend, "Visibility backend")->check(CLI::IsMember({"bvh", "nif", "hybrid"}));
    render_cmd->add_option("--model", ra.model, "Model checkpoint")->check(CLI::ExistingFile);
    render_cmd->add_option("--hybrid-threshold", ra.hybrid_threshold, "Triangle count below which objects keep their BVH");
    render_cmd->add_option("--out", ra.out, "Output path without extension; writes .png and .pfm");
    auto *render_seed = render_cmd->add_option("--seed", ra.seed, "RNG seed (default: scene seed)");
    render_cmd->add_option("--res", ra.res, "Resolution WxH (default: scene camera)");

    TrainArgs ta;
    auto *train_cmd = app.add_subcommand("train", "Collect samples and train a model");
    train_cmd->add_option("--scene", ta.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--train-spp", ta.train_spp, "Pixel samples feeding the training set")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--sampler", ta.sampler, "Shadow-ray sampler")->check(CLI::IsMember({"importance", "uniform"}));
    train_cmd->add_option("--out", ta.out, "Checkpoint path");
    auto *train_seed = train_cmd->add_option("--seed", ta.seed, "RNG seed (default: scene seed)");
    train_cmd->add_option("--res", ta.res, "Resolution WxH (default: scene camera)");
    ta.net.add(train_cmd);

    EvalArgs ea;
    auto *eval_cmd = app.add_subcommand("eval", "Compare two images");
    eval_cmd->add_option("--a", ea.a, "First image (.pfm or .png)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--b", ea.b, "Second image (.pfm or .png)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--out-diff", ea.out_diff, "Error image (PNG)");
    eval_cmd->add_option("--amplify", ea.amplify, "Error amplification k")->check(CLI::NonNegativeNumber);

    BenchArgs ba;
    auto *bench_cmd = app.add_subcommand("bench", "Time BVH against network visibility");
    bench_cmd->add_option("--scenes", ba.scenes, "Scene JSON files")->required()->delimiter(',')->check(CLI::ExistingFile);
    bench_cmd->add_option("--spp", ba.spp, "Pixel-sample passes in the ray set")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--model-dir", ba.model_dir, "Directory of <scene>.nif checkpoints; missing ones are trained");
    bench_cmd->add_option("--out", ba.out, "CSV path");
    bench_cmd->add_option("--seed", ba.seed, "RNG seed");
    bench_cmd->add_option("--res", ba.res, "Resolution WxH (default: scene camera)");
    bench_cmd->add_option("--train-spp", ba.train_spp, "Training spp for missing models")->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--repeats", ba.repeats, "Timed repeats (median reported)")->check(CLI::PositiveNumber);
    ba.net.add(bench_cmd);

    SweepArgs sa;
    auto *sweep_cmd = app.add_subcommand("sweep", "PSNR as a function of grid R or N");
    sweep_cmd->add_option("--scene", sa.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--param", sa.param, "Swept parameter")->required()->check(CLI::IsMember({"R", "N"}));
    sweep_cmd->add_option("--values", sa.values, "Values")->required()->delimiter(',');
    sweep_cmd->add_option("--network", sa.network, "Grids the value applies to")
        ->check(CLI::IsMember({"outer", "inner", "both"}));
    sweep_cmd->add_option("--sampler", sa.sampler, "Shadow-ray sampler")->check(CLI::IsMember({"importance", "uniform"}));
    sweep_cmd->add_option("--train-spp", sa.train_spp, "Training spp")->check(CLI::NonNegativeNumber);
    sweep_cmd->add_option("--spp", sa.spp, "Evaluation spp")->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--out", sa.out, "CSV path");
    auto *sweep_seed = sweep_cmd->add_option("--seed", sa.seed, "RNG seed (default: scene seed)");
    sweep_cmd->add_option("--res", sa.res, "Resolution WxH (default: scene camera)");
    sa.net.add(sweep_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), '\n', ' ');
        std::fprintf(stderr, "nif: usage error: %s\n", what.c_str());
        return 2;
    }

    try {
        if (*render_cmd) {
            ra.seed_set = render_seed->count() > 0;
            return cmd_render(ra);
        }
        if (*train_cmd) {
            ta.seed_set = train_seed->count() > 0;
            return cmd_train(ta);
        }
        if (*eval_cmd) return cmd_eval(ea);
        if (*bench_cmd) return cmd_bench(ba);
        if (*sweep_cmd) {
            sa.seed_set = sweep_seed->count() > 0;
            return cmd_sweep(sa);
        }
    } catch (const UsageError &e) {
        std::fprintf(stderr, "nif: usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception &e) {
        std::string what = e.what();
        std::replace(what.begin(), what.end(), '\n', ' ');
        std::fprintf(stderr, "nif: error: %s\n", what.c_str());
        return 1;
    }
    return 0;
}
