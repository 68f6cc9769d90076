// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

// Regenerates the bundled meshes and scene files:
//   make_scenes <out-dir>

#include <filesystem>
#include <iostream>

#include "nif/obj.hpp"
#include "nif/procedural.hpp"
#include "nif/scene_io.hpp"

namespace fs = std::filesystem;
using namespace nif;

namespace {

LightDesc area_light(Vec3 center, double half, double radiance) {
    LightDesc l;
    l.type = "area";
    // Wound so the emitting side faces -z.
    l.corners = {center + Vec3{-half, -half, 0}, center + Vec3{-half, half, 0}, center + Vec3{half, half, 0},
                 center + Vec3{half, -half, 0}};
    l.radiance = Rgb{radiance};
    return l;
}

ObjectDesc object(std::string mesh, Vec3 translate, double scale, Rgb albedo, bool nif = true) {
    return {std::move(mesh), translate, scale, albedo, nif};
}

Camera camera(Vec3 pos, Vec3 at, int w, int h) {
    Camera c;
    c.position = pos;
    c.look_at = at;
    c.up = {0, 0, 1};
    c.vertical_fov = 40;
    c.width = w;
    c.height = h;
    return c;
}

}  // namespace

int main(int argc, char **argv) {
    if (argc != 2) {
        std::cerr << "usage: make_scenes <out-dir>\n";
        return 2;
    }
    try {
        const fs::path out = argv[1];
        fs::create_directories(out / "meshes");
        write_obj((out / "meshes/icosphere.obj").string(), make_icosphere(3));
        write_obj((out / "meshes/torus.obj").string(), make_torus(1.0, 0.35, 48, 24));
        write_obj((out / "meshes/plane.obj").string(), make_plane(1.0));
        write_obj((out / "meshes/uvsphere_lo.obj").string(), make_uv_sphere(20, 24));

        const Rgb grey{0.8, 0.8, 0.8};
        const ObjectDesc ground = object("meshes/plane.obj", {0, 0, 0}, 4.0, {0.7, 0.7, 0.7}, false);

        SceneDescription sphere;
        sphere.objects = {object("meshes/icosphere.obj", {0, 0, 1}, 1.0, {0.8, 0.5, 0.4}), ground};
        sphere.lights = {area_light({1.0, -1.0, 4.0}, 0.5, 30.0)};
        sphere.camera = camera({0, -6, 3.5}, {0, 0, 0.8}, 512, 288);
        save_scene_description(sphere, (out / "sphere.json").string());

        SceneDescription duo;
        duo.objects = {object("meshes/icosphere.obj", {-1.1, 0, 0.8}, 0.8, {0.8, 0.5, 0.4}),
                       object("meshes/torus.obj", {1.1, 0.2, 0.7}, 0.7, {0.4, 0.6, 0.8}), ground};
        duo.lights = {area_light({0.5, -1.0, 4.0}, 0.5, 30.0)};
        duo.camera = camera({0, -6, 3.5}, {0, 0, 0.6}, 256, 256);
        save_scene_description(duo, (out / "duo.json").string());

        SceneDescription overlap;
        overlap.objects = {object("meshes/icosphere.obj", {0, 0, 1}, 0.9, {0.8, 0.5, 0.4}),
                           object("meshes/torus.obj", {0.6, 0, 0.9}, 0.9, {0.4, 0.6, 0.8}), ground};
        overlap.lights = {area_light({0.5, -1.0, 4.0}, 0.5, 30.0)};
        overlap.camera = camera({0, -6, 3.5}, {0, 0, 0.8}, 256, 256);
        save_scene_description(overlap, (out / "overlap.json").string());

        SceneDescription single;
        single.objects = {object("meshes/icosphere.obj", {0, 0, 0}, 1.0, grey)};
        LightDesc point;
        point.type = "point";
        point.position = {2, -3, 4};
        point.intensity = Rgb{20.0};
        single.lights = {point};
        single.camera = camera({0, -4, 1.5}, {0, 0, 0}, 256, 256);
        save_scene_description(single, (out / "icosphere.json").string());

        SceneDescription uv = sphere;
        uv.objects = {object("meshes/uvsphere_lo.obj", {0, 0, 1}, 1.0, {0.8, 0.5, 0.4}), ground};
        save_scene_description(uv, (out / "uvsphere.json").string());
    } catch (const std::exception &e) {
        std::cerr << "make_scenes: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
