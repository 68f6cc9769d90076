// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Scene descriptions (JSON), model checkpoints and benchmark CSV.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nif/error.hpp"
#include "nif/image_io.hpp"
#include "nif/lights.hpp"
#include "nif/nif_model.hpp"
#include "nif/obj.hpp"
#include "nif/scene.hpp"

namespace nif {

// ---------------------------------------------------------------------------
// Scene description

struct ObjectDesc {
    std::string mesh_path;
    Vec3 translate{};
    double scale = 1.0;
    Rgb albedo{0.8, 0.8, 0.8};
    bool nif_enabled = true;
};

struct LightDesc {
    std::string type;  // "point" or "area"
    Vec3 position{};
    Rgb intensity{};
    std::array<Vec3, 4> corners{};
    Rgb radiance{};
};

struct SceneDescription {
    std::vector<ObjectDesc> objects;
    std::vector<LightDesc> lights;
    std::optional<std::string> environment;
    Camera camera;
    uint64_t seed = 0;
};

namespace detail {

inline Vec3 json_vec3(const nlohmann::json &j, const char *what) {
    if (!j.is_array() || j.size() != 3) throw Error(std::string("scene: '") + what + "' must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Rgb json_rgb(const nlohmann::json &j, const char *what) {
    Vec3 v = json_vec3(j, what);
    if (v.x < 0 || v.y < 0 || v.z < 0) throw Error(std::string("scene: '") + what + "' must be nonnegative");
    return {v.x, v.y, v.z};
}

inline nlohmann::json to_json(const Vec3 &v) { return {v.x, v.y, v.z}; }
inline nlohmann::json to_json(const Rgb &c) { return {c.r, c.g, c.b}; }

}  // namespace detail

inline SceneDescription parse_scene_description(const nlohmann::json &j) {
    using detail::json_rgb;
    using detail::json_vec3;
    SceneDescription d;
    try {
        for (const auto &o : j.at("objects")) {
            ObjectDesc od;
            od.mesh_path = o.at("mesh_path").get<std::string>();
            if (o.contains("translate")) od.translate = json_vec3(o["translate"], "translate");
            if (o.contains("scale")) od.scale = o["scale"].get<double>();
            if (!(od.scale > 0)) throw Error("scene: object scale must be > 0");
            if (o.contains("albedo")) od.albedo = json_rgb(o["albedo"], "albedo");
            if (o.contains("nif_enabled")) od.nif_enabled = o["nif_enabled"].get<bool>();
            d.objects.push_back(od);
        }
        if (j.contains("lights"))
            for (const auto &l : j["lights"]) {
                LightDesc ld;
                ld.type = l.at("type").get<std::string>();
                if (ld.type == "point") {
                    ld.position = json_vec3(l.at("position"), "position");
                    ld.intensity = json_rgb(l.at("intensity"), "intensity");
                } else if (ld.type == "area") {
                    const auto &c = l.at("corners");
                    if (!c.is_array() || c.size() != 4) throw Error("scene: area light needs 4 corners");
                    for (int k = 0; k < 4; ++k) ld.corners[k] = json_vec3(c[k], "corners");
                    ld.radiance = json_rgb(l.at("radiance"), "radiance");
                } else {
                    throw Error("scene: unknown light type '" + ld.type + "'");
                }
                d.lights.push_back(ld);
            }
        if (j.contains("environment") && !j["environment"].is_null())
            d.environment = j["environment"].get<std::string>();
        if (j.contains("camera")) {
            const auto &c = j["camera"];
            if (c.contains("position")) d.camera.position = json_vec3(c["position"], "position");
            if (c.contains("look_at")) d.camera.look_at = json_vec3(c["look_at"], "look_at");
            if (c.contains("up")) d.camera.up = json_vec3(c["up"], "up");
            if (c.contains("vertical_fov")) d.camera.vertical_fov = c["vertical_fov"].get<double>();
            if (c.contains("width")) d.camera.width = c["width"].get<int>();
            if (c.contains("height")) d.camera.height = c["height"].get<int>();
        }
        if (j.contains("seed")) d.seed = j["seed"].get<uint64_t>();
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("scene: ") + e.what());
    }
    d.camera.validate();
    return d;
}

inline nlohmann::json scene_description_to_json(const SceneDescription &d) {
    using detail::to_json;
    nlohmann::json j;
    j["objects"] = nlohmann::json::array();
    for (const ObjectDesc &o : d.objects)
        j["objects"].push_back({{"mesh_path", o.mesh_path},
                                {"translate", to_json(o.translate)},
                                {"scale", o.scale},
                                {"albedo", to_json(o.albedo)},
                                {"nif_enabled", o.nif_enabled}});
    j["lights"] = nlohmann::json::array();
    for (const LightDesc &l : d.lights) {
        if (l.type == "point")
            j["lights"].push_back({{"type", "point"}, {"position", to_json(l.position)}, {"intensity", to_json(l.intensity)}});
        else
            j["lights"].push_back({{"type", "area"},
                                   {"corners", {to_json(l.corners[0]), to_json(l.corners[1]), to_json(l.corners[2]),
                                                to_json(l.corners[3])}},
                                   {"radiance", to_json(l.radiance)}});
    }
    j["environment"] = d.environment ? nlohmann::json(*d.environment) : nlohmann::json(nullptr);
    j["camera"] = {{"position", to_json(d.camera.position)},
                   {"look_at", to_json(d.camera.look_at)},
                   {"up", to_json(d.camera.up)},
                   {"vertical_fov", d.camera.vertical_fov},
                   {"width", d.camera.width},
                   {"height", d.camera.height}};
    j["seed"] = d.seed;
    return j;
}

/// Loads meshes (relative to `base_dir`), builds lights and acceleration structures.
inline Scene build_scene(const SceneDescription &d, const std::filesystem::path &base_dir) {
    Scene scene;
    for (size_t k = 0; k < d.objects.size(); ++k) {
        const ObjectDesc &o = d.objects[k];
        std::filesystem::path p = o.mesh_path;
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw Error("scene: mesh '" + p.string() + "' not found");
        ObjMesh mesh = load_obj(p.string());
        for (Triangle &t : mesh.triangles)
            for (Vec3 &v : t.v) v = v * o.scale + o.translate;
        scene.add_object(std::move(mesh.triangles), o.albedo, o.nif_enabled, p.stem().string());
    }
    for (const LightDesc &l : d.lights) {
        if (l.type == "point")
            scene.lights.push_back(PointLight{l.position, l.intensity});
        else
            scene.lights.push_back(AreaLight::from_corners(l.corners[0], l.corners[1], l.corners[2], l.corners[3], l.radiance));
    }
    if (d.environment) {
        std::filesystem::path p = *d.environment;
        if (p.is_relative()) p = base_dir / p;
        if (!std::filesystem::exists(p)) throw Error("scene: environment '" + p.string() + "' not found");
        HdrImage env = read_pfm(p.string());
        std::vector<Rgb> texels(env.pixel_count());
        for (size_t i = 0; i < texels.size(); ++i) texels[i] = env.pixel(i);
        scene.lights.push_back(EnvironmentLight(env.width(), env.height(), std::move(texels)));
    }
    scene.camera = d.camera;
    scene.seed = d.seed;
    scene.build();
    return scene;
}

inline Scene load_scene(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scene '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw Error("scene '" + path + "': " + e.what());
    }
    return build_scene(parse_scene_description(j), std::filesystem::path(path).parent_path());
}

inline void save_scene_description(const SceneDescription &d, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scene '" + path + "'");
    out << scene_description_to_json(d).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Model checkpoints
//
// Layout: "NIF1", u32 version, u32 json length, JSON config, then arrays as
// (u32 ndims, u32 dims[ndims], float32 data[]), all little-endian. Arrays per
// object: outer pos/dir grids, inner pos/dir grids, inner distance grid; then
// per network pair: outer layers (weights in x out, bias), inner layers.

inline constexpr char kCheckpointMagic[4] = {'N', 'I', 'F', '1'};
inline constexpr uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
  public:
    void u32(uint32_t v) {
        v = to_le(v);
        bytes_.append(reinterpret_cast<const char *>(&v), 4);
    }
    void raw(const void *p, size_t n) { bytes_.append(static_cast<const char *>(p), n); }
    void floats(std::span<const float> data, std::initializer_list<uint32_t> dims) {
        u32(uint32_t(dims.size()));
        size_t n = 1;
        for (uint32_t d : dims) {
            u32(d);
            n *= d;
        }
        if (n != data.size()) throw Error("checkpoint: array shape does not match its data");
        for (float f : data) u32(std::bit_cast<uint32_t>(f));
    }
    const std::string &bytes() const { return bytes_; }

  private:
    std::string bytes_;
};

class ByteReader {
  public:
    explicit ByteReader(std::string data) : data_(std::move(data)) {}
    void need(size_t n) const {
        if (pos_ + n > data_.size()) throw Error("checkpoint: file is truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, data_.data() + pos_, 4);
        pos_ += 4;
        return to_le(v);
    }
    std::string str(size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void floats(std::span<float> out, std::initializer_list<uint32_t> dims) {
        const uint32_t nd = u32();
        if (nd != dims.size()) throw Error("checkpoint: array rank mismatch");
        for (uint32_t d : dims)
            if (u32() != d) throw Error("checkpoint: array shape mismatch");
        need(out.size() * 4);
        for (float &f : out) f = std::bit_cast<float>(u32());
    }
    bool at_end() const { return pos_ == data_.size(); }

  private:
    std::string data_;
    size_t pos_ = 0;
};

inline nlohmann::json config_to_json(const NifModel &m) {
    const NifConfig &c = m.config();
    return {{"outer",
             {{"hidden_layers", c.outer.hidden_layers},
              {"hidden_width", c.outer.hidden_width},
              {"grid_R", c.outer.grid_R},
              {"grid_N", c.outer.grid_N},
              {"batch", c.outer.batch}}},
            {"inner",
             {{"hidden_layers", c.inner.hidden_layers},
              {"hidden_width", c.inner.hidden_width},
              {"pos_dir_grid_R", c.inner.pos_dir_grid_R},
              {"pos_dir_grid_N", c.inner.pos_dir_grid_N},
              {"dist_grid_R", c.inner.dist_grid_R},
              {"dist_grid_N", c.inner.dist_grid_N},
              {"batch", c.inner.batch}}},
            {"learning_rate", c.learning_rate},
            {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
            {"sharing", to_string(c.sharing)},
            {"head", to_string(c.head)},
            {"epochs", c.epochs},
            {"leaky_slope", c.leaky_slope},
            {"object_count", m.object_count()},
            {"seed", m.seed()},
            {"scene_diagonal", m.scene_diagonal()},
            {"trained", m.trained()}};
}

inline NifConfig config_from_json(const nlohmann::json &j) {
    NifConfig c;
    const auto &o = j.at("outer");
    c.outer.hidden_layers = o.at("hidden_layers");
    c.outer.hidden_width = o.at("hidden_width");
    c.outer.grid_R = o.at("grid_R");
    c.outer.grid_N = o.at("grid_N");
    c.outer.batch = o.at("batch");
    const auto &i = j.at("inner");
    c.inner.hidden_layers = i.at("hidden_layers");
    c.inner.hidden_width = i.at("hidden_width");
    c.inner.pos_dir_grid_R = i.at("pos_dir_grid_R");
    c.inner.pos_dir_grid_N = i.at("pos_dir_grid_N");
    c.inner.dist_grid_R = i.at("dist_grid_R");
    c.inner.dist_grid_N = i.at("dist_grid_N");
    c.inner.batch = i.at("batch");
    c.learning_rate = j.at("learning_rate");
    c.adam.beta1 = j.at("adam").at("beta1");
    c.adam.beta2 = j.at("adam").at("beta2");
    c.adam.epsilon = j.at("adam").at("epsilon");
    const std::string sharing = j.at("sharing"), head = j.at("head");
    if (sharing != "shared" && sharing != "per-object") throw Error("checkpoint: unknown sharing '" + sharing + "'");
    if (head != "occlusion" && head != "geometry") throw Error("checkpoint: unknown head '" + head + "'");
    c.sharing = sharing == "shared" ? Sharing::shared : Sharing::per_object;
    c.head = head == "occlusion" ? Head::occlusion : Head::geometry;
    c.epochs = j.at("epochs");
    c.leaky_slope = j.at("leaky_slope");
    return c;
}

template <typename Fn>
void for_each_array(NifModel &m, Fn &&fn) {
    for (uint32_t k = 0; k < m.object_count(); ++k) {
        ObjectGrids &g = m.grids(k);
        for (auto *grid : {&g.outer_pos, &g.outer_dir, &g.inner_pos, &g.inner_dir})
            fn(grid->latents(), {uint32_t(grid->resolution()), uint32_t(grid->resolution()), uint32_t(grid->latent_dim())});
        fn(g.inner_dist.latents(), {uint32_t(g.inner_dist.resolution()), uint32_t(g.inner_dist.latent_dim())});
    }
    for (size_t n = 0; n < m.network_count(); ++n)
        for (auto *nets : {&m.outer_nets(), &m.inner_nets()})
            for (DenseLayer<float> &l : (*nets)[n].layers()) {
                fn(std::span<float>(l.wt), {uint32_t(l.in), uint32_t(l.out)});
                fn(std::span<float>(l.bias), {uint32_t(l.out)});
            }
}

}  // namespace detail

inline std::string encode_checkpoint(const NifModel &model) {
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    const std::string json = detail::config_to_json(model).dump();
    w.u32(uint32_t(json.size()));
    w.raw(json.data(), json.size());
    // for_each_array only reads through the spans here.
    detail::for_each_array(const_cast<NifModel &>(model),
                           [&](std::span<float> data, std::initializer_list<uint32_t> dims) { w.floats(data, dims); });
    return w.bytes();
}

inline void save_checkpoint(const NifModel &model, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    const std::string bytes = encode_checkpoint(model);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

namespace detail {

struct CheckpointHeader {
    NifConfig config;
    size_t object_count;
    uint64_t seed;
    double scene_diagonal;
    bool trained;
};

inline CheckpointHeader read_checkpoint_header(ByteReader &r) {
    if (r.str(4) != std::string(kCheckpointMagic, 4)) throw Error("checkpoint: bad magic");
    const uint32_t version = r.u32();
    if (version != kCheckpointVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
    const uint32_t len = r.u32();
    try {
        nlohmann::json j = nlohmann::json::parse(r.str(len));
        return {config_from_json(j), j.at("object_count").get<size_t>(), j.at("seed").get<uint64_t>(),
                j.at("scene_diagonal").get<double>(), j.at("trained").get<bool>()};
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("checkpoint: bad config block: ") + e.what());
    }
}

inline std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void read_arrays(ByteReader &r, NifModel &model) {
    detail::for_each_array(model, [&](std::span<float> data, std::initializer_list<uint32_t> dims) { r.floats(data, dims); });
    for (auto *nets : {&model.outer_nets(), &model.inner_nets()})
        for (Mlp<float> &net : *nets)
            for (DenseLayer<float> &l : net.layers()) l.sync_mirror();
    if (!r.at_end()) throw Error("checkpoint: trailing bytes");
}

}  // namespace detail

inline NifModel decode_checkpoint(std::string bytes) {
    detail::ByteReader r(std::move(bytes));
    detail::CheckpointHeader h = detail::read_checkpoint_header(r);
    NifModel model(h.config, h.object_count, h.seed);
    model.set_scene_diagonal(h.scene_diagonal);
    model.set_trained(h.trained);
    detail::read_arrays(r, model);
    return model;
}

inline NifModel load_checkpoint(const std::string &path) {
    try {
        return decode_checkpoint(detail::read_file(path));
    } catch (const Error &e) {
        throw Error(path + ": " + e.what());
    }
}

/// Loads parameters into an existing model; the stored configuration must match.
inline void load_checkpoint_into(NifModel &model, const std::string &path) {
    detail::ByteReader r(detail::read_file(path));
    detail::CheckpointHeader h = detail::read_checkpoint_header(r);
    if (!h.config.same_structure(model.config()) || h.object_count != model.object_count())
        throw Error(path + ": checkpoint configuration does not match the model");
    model.set_scene_diagonal(h.scene_diagonal);
    model.set_trained(h.trained);
    detail::read_arrays(r, model);
}

// ---------------------------------------------------------------------------
// Benchmark report

struct BenchRow {
    std::string scene;
    uint64_t triangles = 0;
    uint64_t shadow_rays = 0, outer_rays = 0, inner_rays = 0;
    double bvh_ray_cast_us = 0;
    double nif_ray_cast_us = 0;  // top-level traversal and query gathering
    double outer_grid_us = 0, outer_inference_us = 0;
    double inner_grid_us = 0, inner_inference_us = 0;
    double nif_total_us = 0;
    double speedup = 0;

    void finalize() {
        nif_total_us = nif_ray_cast_us + outer_grid_us + outer_inference_us + inner_grid_us + inner_inference_us;
        speedup = nif_total_us > 0 ? bvh_ray_cast_us / nif_total_us : 0.0;
    }
};

inline constexpr const char *kBenchCsvHeader =
    "scene,triangles,shadow_rays,outer_rays,inner_rays,bvh_ray_cast_us,nif_ray_cast_us,outer_grid_us,"
    "outer_inference_us,inner_grid_us,inner_inference_us,nif_total_us,speedup";

inline std::string format_bench_csv(const std::vector<BenchRow> &rows) {
    std::string out = std::string(kBenchCsvHeader) + "\n";
    char buf[512];
    for (const BenchRow &r : rows) {
        if (r.scene.find_first_of(",\"\n") != std::string::npos) throw Error("bench csv: scene name contains a delimiter");
        std::snprintf(buf, sizeof buf, "%s,%llu,%llu,%llu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.scene.c_str(), (unsigned long long)r.triangles, (unsigned long long)r.shadow_rays,
                      (unsigned long long)r.outer_rays, (unsigned long long)r.inner_rays, r.bvh_ray_cast_us,
                      r.nif_ray_cast_us, r.outer_grid_us, r.outer_inference_us, r.inner_grid_us, r.inner_inference_us,
                      r.nif_total_us, r.speedup);
        out += buf;
    }
    return out;
}

inline void write_bench_csv(const std::vector<BenchRow> &rows, const std::string &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path + "'");
    out << format_bench_csv(rows);
    if (!out) throw Error("failed writing '" + path + "'");
}

inline std::vector<BenchRow> read_bench_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != kBenchCsvHeader) throw Error("bench csv: unexpected header");
    std::vector<BenchRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 13) throw Error("bench csv: expected 13 columns, got " + std::to_string(f.size()));
        BenchRow r;
        try {
            r.scene = f[0];
            r.triangles = std::stoull(f[1]);
            r.shadow_rays = std::stoull(f[2]);
            r.outer_rays = std::stoull(f[3]);
            r.inner_rays = std::stoull(f[4]);
            double *dst[] = {&r.bvh_ray_cast_us, &r.nif_ray_cast_us, &r.outer_grid_us,  &r.outer_inference_us,
                             &r.inner_grid_us,   &r.inner_inference_us, &r.nif_total_us, &r.speedup};
            for (int k = 0; k < 8; ++k) *dst[k] = std::stod(f[5 + k]);
        } catch (const std::logic_error &) {
            throw Error("bench csv: malformed row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace nif
