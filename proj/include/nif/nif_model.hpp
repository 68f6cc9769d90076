// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Neural intersection function: per-object feature grids feeding an outer
// network (rays entering a box from outside) and an inner network (rays that
// start inside a box). Grid lookups are concatenated into the network input.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <type_traits>
#include <string>
#include <vector>

#include "nif/error.hpp"
#include "nif/feature_grid.hpp"
#include "nif/geometry.hpp"
#include "nif/mlp.hpp"
#include "nif/parallel.hpp"
#include "nif/rng.hpp"
#include "nif/timer.hpp"

namespace nif {

enum class Sharing { shared, per_object };
enum class Head { occlusion, geometry };

inline const char *to_string(Sharing s) { return s == Sharing::shared ? "shared" : "per-object"; }
inline const char *to_string(Head h) { return h == Head::occlusion ? "occlusion" : "geometry"; }

struct OuterNetConfig {
    int hidden_layers = 2;
    int hidden_width = 64;
    int grid_R = 256;
    int grid_N = 3;
    size_t batch = 1u << 11;

    bool operator==(const OuterNetConfig &) const = default;
};

struct InnerNetConfig {
    int hidden_layers = 3;
    int hidden_width = 48;
    int pos_dir_grid_R = 128;
    int pos_dir_grid_N = 5;
    int dist_grid_R = 128;
    int dist_grid_N = 3;
    size_t batch = 1u << 12;

    bool operator==(const InnerNetConfig &) const = default;
};

struct NifConfig {
    OuterNetConfig outer;
    InnerNetConfig inner;
    double learning_rate = 0.005;
    AdamParams adam;  // step_count is ignored; each parameter set keeps its own
    Sharing sharing = Sharing::shared;
    Head head = Head::occlusion;
    int epochs = 30;
    double leaky_slope = 0.01;

    int outer_input_dim() const { return 2 * outer.grid_N; }
    int inner_input_dim() const { return 2 * inner.pos_dir_grid_N + inner.dist_grid_N; }
    int output_dim() const { return head == Head::occlusion ? 1 : 4; }

    void validate() const {
        auto positive = [](long v, const char *name) {
            if (v < 1) throw Error(std::string("nif config: ") + name + " must be >= 1");
        };
        positive(outer.hidden_layers, "outer.hidden_layers");
        positive(outer.hidden_width, "outer.hidden_width");
        positive(outer.grid_R, "outer.grid_R");
        positive(outer.grid_N, "outer.grid_N");
        positive(long(outer.batch), "outer.batch");
        positive(inner.hidden_layers, "inner.hidden_layers");
        positive(inner.hidden_width, "inner.hidden_width");
        positive(inner.pos_dir_grid_R, "inner.pos_dir_grid_R");
        positive(inner.pos_dir_grid_N, "inner.pos_dir_grid_N");
        positive(inner.dist_grid_R, "inner.dist_grid_R");
        positive(inner.dist_grid_N, "inner.dist_grid_N");
        positive(long(inner.batch), "inner.batch");
        if (epochs < 0) throw Error("nif config: epochs must be >= 0");
        if (!(learning_rate > 0)) throw Error("nif config: learning_rate must be positive");
        AdamParams a = adam;
        a.learning_rate = learning_rate;
        a.validate();
    }

    /// Equality of everything that shapes the parameters or the training run.
    bool same_structure(const NifConfig &o) const {
        return outer == o.outer && inner == o.inner && sharing == o.sharing && head == o.head &&
               leaky_slope == o.leaky_slope;
    }
};

/// Training label. Occlusion uses value[0] (1 = visible, 0 = occluded);
/// geometry uses (nx, ny, nz, depth / scene diagonal).
using Label = std::array<float, 4>;

struct OuterSample {
    OuterQuery query;
    Label label{};
};

struct InnerSample {
    InnerQuery query;
    Label label{};
};

struct SampleSet {
    std::vector<OuterSample> outer;
    std::vector<InnerSample> inner;
    size_t shadow_rays = 0;

    size_t size() const { return outer.size() + inner.size(); }
    void append(SampleSet &&o) {
        outer.insert(outer.end(), o.outer.begin(), o.outer.end());
        inner.insert(inner.end(), o.inner.begin(), o.inner.end());
        shadow_rays += o.shadow_rays;
    }
};

struct ObjectGrids {
    FeatureGrid2D<float> outer_pos, outer_dir;
    FeatureGrid2D<float> inner_pos, inner_dir;
    FeatureGrid1D<float> inner_dist;
};

struct GeometryPrediction {
    Vec3 normal;   // unit
    double depth;  // distance from the box entry point along the ray, scene units
};

struct TrainingReport {
    std::vector<double> loss;  // per-epoch mean over all samples
    std::vector<double> outer_loss, inner_loss;
    size_t steps = 0;
    double seconds = 0;
};

/// Per-stage wall time of batched inference, in microseconds.
struct InferenceTimes {
    double outer_grid_us = 0, outer_inference_us = 0;
    double inner_grid_us = 0, inner_inference_us = 0;
};

class NifModel {
  public:
    NifModel() = default;

    NifModel(const NifConfig &config, size_t object_count, uint64_t seed)
        : config_(config), object_count_(object_count), seed_(seed) {
        config_.validate();
        if (object_count == 0) throw Error("nif model: object_count must be >= 1");
        grids_.reserve(object_count);
        for (size_t k = 0; k < object_count; ++k) {
            auto s = [&](uint64_t which) { return hash_combine(hash_combine(seed, k + 1), which); };
            ObjectGrids g{
                FeatureGrid2D<float>(config_.outer.grid_R, config_.outer.grid_N, true, s(1)),
                FeatureGrid2D<float>(config_.outer.grid_R, config_.outer.grid_N, true, s(2)),
                FeatureGrid2D<float>(config_.inner.pos_dir_grid_R, config_.inner.pos_dir_grid_N, true, s(3)),
                FeatureGrid2D<float>(config_.inner.pos_dir_grid_R, config_.inner.pos_dir_grid_N, true, s(4)),
                FeatureGrid1D<float>(config_.inner.dist_grid_R, config_.inner.dist_grid_N, false, s(5)),
            };
            for (auto *grid : {&g.outer_pos, &g.outer_dir, &g.inner_pos, &g.inner_dir}) grid->adam() = adam_params();
            g.inner_dist.adam() = adam_params();
            grids_.push_back(std::move(g));
        }
        const size_t nets = config_.sharing == Sharing::shared ? 1 : object_count;
        const OutputActivation act =
            config_.head == Head::occlusion ? OutputActivation::sigmoid : OutputActivation::identity;
        for (size_t k = 0; k < nets; ++k) {
            outer_.emplace_back(config_.outer_input_dim(),
                                std::vector<int>(config_.outer.hidden_layers, config_.outer.hidden_width),
                                config_.output_dim(), act, float(config_.leaky_slope));
            inner_.emplace_back(config_.inner_input_dim(),
                                std::vector<int>(config_.inner.hidden_layers, config_.inner.hidden_width),
                                config_.output_dim(), act, float(config_.leaky_slope));
            outer_.back().xavier_init(hash_combine(seed, 1000 + 2 * k));
            inner_.back().xavier_init(hash_combine(seed, 1001 + 2 * k));
            outer_.back().adam() = adam_params();
            inner_.back().adam() = adam_params();
        }
    }

    const NifConfig &config() const { return config_; }
    size_t object_count() const { return object_count_; }
    uint64_t seed() const { return seed_; }
    double scene_diagonal() const { return scene_diagonal_; }
    void set_scene_diagonal(double d) { scene_diagonal_ = d; }
    bool trained() const { return trained_; }
    void set_trained(bool t) { trained_ = t; }

    ObjectGrids &grids(uint32_t object_id) { return grids_.at(object_id); }
    const ObjectGrids &grids(uint32_t object_id) const { return grids_.at(object_id); }
    size_t network_count() const { return outer_.size(); }
    Mlp<float> &outer_net(uint32_t object_id) { return outer_[net_index(object_id)]; }
    const Mlp<float> &outer_net(uint32_t object_id) const { return outer_[net_index(object_id)]; }
    Mlp<float> &inner_net(uint32_t object_id) { return inner_[net_index(object_id)]; }
    const Mlp<float> &inner_net(uint32_t object_id) const { return inner_[net_index(object_id)]; }
    std::vector<Mlp<float>> &outer_nets() { return outer_; }
    std::vector<Mlp<float>> &inner_nets() { return inner_; }
    const std::vector<Mlp<float>> &outer_nets() const { return outer_; }
    const std::vector<Mlp<float>> &inner_nets() const { return inner_; }

    size_t net_index(uint32_t object_id) const {
        if (object_id >= object_count_) throw Error("nif model: unknown object_id " + std::to_string(object_id));
        return config_.sharing == Sharing::shared ? 0 : object_id;
    }

    /// Zeroes every network parameter; the output becomes the activation at 0.
    void zero_networks() {
        for (auto &n : outer_) n.zero_parameters();
        for (auto &n : inner_) n.zero_parameters();
    }

    /// concat(pos lookup at p', dir lookup at d') -> 2 * outer.grid_N values.
    void encode_outer(const OuterQuery &q, std::span<float> out) const {
        const ObjectGrids &g = grids_.at(checked(q.object_id));
        const int n = config_.outer.grid_N;
        const std::array<double, 2> p{q.p_prime.u, q.p_prime.v}, d{q.d_prime.u, q.d_prime.v};
        g.outer_pos.lookup(p, out.subspan(0, n));
        g.outer_dir.lookup(d, out.subspan(n, n));
    }

    std::vector<float> encode_outer(const OuterQuery &q) const {
        std::vector<float> v(config_.outer_input_dim());
        encode_outer(q, v);
        return v;
    }

    /// concat(pos at p', dir at d', dist at r') -> 2 * pos_dir_grid_N + dist_grid_N values.
    void encode_inner(const InnerQuery &q, std::span<float> out) const {
        const ObjectGrids &g = grids_.at(checked(q.object_id));
        const int n = config_.inner.pos_dir_grid_N, nd = config_.inner.dist_grid_N;
        const std::array<double, 2> p{q.p_prime.u, q.p_prime.v}, d{q.d_prime.u, q.d_prime.v};
        const std::array<double, 1> r{q.r_prime};
        g.inner_pos.lookup(p, out.subspan(0, n));
        g.inner_dir.lookup(d, out.subspan(n, n));
        g.inner_dist.lookup(r, out.subspan(2 * n, nd));
    }

    std::vector<float> encode_inner(const InnerQuery &q) const {
        std::vector<float> v(config_.inner_input_dim());
        encode_inner(q, v);
        return v;
    }

    /// Raw network outputs (probability for the occlusion head) for a batch
    /// of outer queries. Each output depends only on its own query.
    std::vector<float> predict_outer(std::span<const OuterQuery> queries, InferenceTimes *times = nullptr) const {
        return predict<OuterQuery>(queries, config_.outer_input_dim(), times);
    }

    std::vector<float> predict_inner(std::span<const InnerQuery> queries, InferenceTimes *times = nullptr) const {
        return predict<InnerQuery>(queries, config_.inner_input_dim(), times);
    }

    /// Both phases in sequence: outer batch first, then inner.
    struct OcclusionBits {
        std::vector<uint8_t> outer, inner;  // 1 = occluded
    };

    OcclusionBits infer_occlusion(std::span<const OuterQuery> outer, std::span<const InnerQuery> inner,
                                  InferenceTimes *times = nullptr) const {
        if (config_.head != Head::occlusion) throw Error("infer_occlusion: model has a geometry head");
        OcclusionBits bits;
        std::vector<float> po = predict_outer(outer, times);
        std::vector<float> pi = predict_inner(inner, times);
        bits.outer.resize(po.size());
        bits.inner.resize(pi.size());
        for (size_t k = 0; k < po.size(); ++k) bits.outer[k] = po[k] < 0.5f;
        for (size_t k = 0; k < pi.size(); ++k) bits.inner[k] = pi[k] < 0.5f;
        return bits;
    }

    std::vector<GeometryPrediction> infer_geometry(std::span<const OuterQuery> queries) const {
        if (config_.head != Head::geometry) throw Error("infer_geometry: model has an occlusion head");
        std::vector<float> raw = predict_outer(queries);
        std::vector<GeometryPrediction> out(queries.size());
        for (size_t k = 0; k < queries.size(); ++k) {
            const float *p = raw.data() + 4 * k;
            Vec3 n{p[0], p[1], p[2]};
            double len = length(n);
            out[k].normal = len > 0 ? n / len : Vec3{0, 0, 1};
            out[k].depth = double(p[3]) * scene_diagonal_;
        }
        return out;
    }

    /// Joint Adam training of networks and touched grid cells on shuffled
    /// mini-batches. Returns per-epoch mean losses.
    TrainingReport train(const SampleSet &samples, int epochs, uint64_t shuffle_seed = 0) {
        TrainingReport report;
        Timer timer;
        if (epochs < 0) throw Error("train: epochs must be >= 0");
        std::mt19937_64 rng(hash_combine(seed_, shuffle_seed));
        std::vector<uint32_t> outer_order(samples.outer.size()), inner_order(samples.inner.size());
        for (int e = 0; e < epochs; ++e) {
            std::iota(outer_order.begin(), outer_order.end(), 0u);
            std::iota(inner_order.begin(), inner_order.end(), 0u);
            std::shuffle(outer_order.begin(), outer_order.end(), rng);
            std::shuffle(inner_order.begin(), inner_order.end(), rng);
            auto outer_batches = make_batches(outer_order, samples.outer, config_.outer.batch);
            auto inner_batches = make_batches(inner_order, samples.inner, config_.inner.batch);
            double outer_sum = 0, inner_sum = 0;
            for (const auto &b : outer_batches) {
                outer_sum += train_outer_batch(samples.outer, b) * double(b.size());
                ++report.steps;
            }
            for (const auto &b : inner_batches) {
                inner_sum += train_inner_batch(samples.inner, b) * double(b.size());
                ++report.steps;
            }
            const double no = double(samples.outer.size()), ni = double(samples.inner.size());
            report.outer_loss.push_back(no > 0 ? outer_sum / no : 0.0);
            report.inner_loss.push_back(ni > 0 ? inner_sum / ni : 0.0);
            report.loss.push_back(no + ni > 0 ? (outer_sum + inner_sum) / (no + ni) : 0.0);
        }
        if (epochs > 0 && samples.size() > 0) trained_ = true;
        report.seconds = timer.seconds();
        return report;
    }

    /// Runtime grid footprint of one object (2-byte latents).
    uint64_t runtime_grid_bytes_per_object() const {
        return outer_grid_set_bytes(config_.outer.grid_R, false) +
               2 * grid_bytes(config_.inner.pos_dir_grid_R, 2, false) + grid_bytes(config_.inner.dist_grid_R, 1, false);
    }

  private:
    AdamParams adam_params() const {
        AdamParams a = config_.adam;
        a.learning_rate = config_.learning_rate;
        a.step_count = 0;
        return a;
    }

    uint32_t checked(uint32_t object_id) const {
        if (object_id >= object_count_) throw Error("nif model: unknown object_id " + std::to_string(object_id));
        return object_id;
    }

    void encode(const OuterQuery &q, std::span<float> out) const { encode_outer(q, out); }
    void encode(const InnerQuery &q, std::span<float> out) const { encode_inner(q, out); }
    const Mlp<float> &net_for(const OuterQuery &q) const { return outer_net(q.object_id); }
    const Mlp<float> &net_for(const InnerQuery &q) const { return inner_net(q.object_id); }

    static constexpr size_t kInferenceChunk = 1024;

    template <typename Query>
    std::vector<float> predict(std::span<const Query> queries, int in_dim, InferenceTimes *times) const {
        const int out_dim = config_.output_dim();
        std::vector<float> out(queries.size() * out_dim);
        if (queries.empty()) return out;
        for (const Query &q : queries) checked(q.object_id);

        // Group by network so each chunk runs through a single MLP.
        std::vector<uint32_t> order(queries.size());
        std::iota(order.begin(), order.end(), 0u);
        if (config_.sharing == Sharing::per_object)
            std::stable_sort(order.begin(), order.end(),
                             [&](uint32_t a, uint32_t b) { return queries[a].object_id < queries[b].object_id; });
        struct Chunk {
            size_t begin, end;
        };
        std::vector<Chunk> chunks;
        for (size_t s = 0; s < order.size();) {
            size_t e = s;
            const size_t net = net_index(queries[order[s]].object_id);
            while (e < order.size() && e - s < kInferenceChunk && net_index(queries[order[e]].object_id) == net) ++e;
            chunks.push_back({s, e});
            s = e;
        }

        // Grid stage, then inference stage, each parallel over chunks.
        std::vector<float> inputs(queries.size() * in_dim);
        Timer t;
        parallel_for(chunks.size(), [&](size_t c) {
            for (size_t k = chunks[c].begin; k < chunks[c].end; ++k)
                encode(queries[order[k]], std::span<float>(inputs.data() + k * in_dim, in_dim));
        });
        const double grid_us = t.microseconds();
        t.reset();
        std::vector<float> sorted_out(out.size());
        parallel_for(chunks.size(), [&](size_t c) {
            const size_t n = chunks[c].end - chunks[c].begin;
            const Mlp<float> &net = net_for(queries[order[chunks[c].begin]]);
            net.infer(std::span<const float>(inputs.data() + chunks[c].begin * in_dim, n * in_dim), n,
                      std::span<float>(sorted_out.data() + chunks[c].begin * out_dim, n * out_dim));
        });
        const double infer_us = t.microseconds();
        for (size_t k = 0; k < order.size(); ++k)
            std::copy_n(sorted_out.data() + k * out_dim, out_dim, out.data() + size_t(order[k]) * out_dim);
        if (times) {
            if constexpr (std::is_same_v<Query, OuterQuery>) {
                times->outer_grid_us += grid_us;
                times->outer_inference_us += infer_us;
            } else {
                times->inner_grid_us += grid_us;
                times->inner_inference_us += infer_us;
            }
        }
        return out;
    }

    template <typename Sample>
    std::vector<std::vector<uint32_t>> make_batches(const std::vector<uint32_t> &shuffled,
                                                    const std::vector<Sample> &samples, size_t batch) const {
        std::vector<std::vector<uint32_t>> batches;
        if (shuffled.empty()) return batches;
        std::vector<uint32_t> order = shuffled;
        if (config_.sharing == Sharing::per_object)
            std::stable_sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
                return samples[a].query.object_id < samples[b].query.object_id;
            });
        size_t s = 0;
        while (s < order.size()) {
            size_t e = s;
            const size_t net = net_index(samples[order[s]].query.object_id);
            while (e < order.size() && e - s < batch && net_index(samples[order[e]].query.object_id) == net) ++e;
            batches.emplace_back(order.begin() + s, order.begin() + e);
            s = e;
        }
        return batches;
    }

    std::vector<float> batch_targets(const auto &samples, const std::vector<uint32_t> &idx) const {
        const int out_dim = config_.output_dim();
        std::vector<float> target(idx.size() * out_dim);
        for (size_t k = 0; k < idx.size(); ++k)
            for (int j = 0; j < out_dim; ++j) target[k * out_dim + j] = samples[idx[k]].label[j];
        return target;
    }

    double train_outer_batch(const std::vector<OuterSample> &samples, const std::vector<uint32_t> &idx) {
        const int in_dim = config_.outer_input_dim(), n = config_.outer.grid_N;
        std::vector<float> x(idx.size() * in_dim);
        for (size_t k = 0; k < idx.size(); ++k)
            encode_outer(samples[idx[k]].query, std::span<float>(x.data() + k * in_dim, in_dim));
        Mlp<float> &net = outer_net(samples[idx[0]].query.object_id);
        std::span<const float> pred = net.forward(x, idx.size());
        std::vector<float> target = batch_targets(samples, idx);
        LossResult<float> loss = l2_loss<float>(pred, target);
        std::vector<float> dx = net.backward(loss.grad);
        std::vector<uint8_t> touched(object_count_, 0);
        for (size_t k = 0; k < idx.size(); ++k) {
            const OuterQuery &q = samples[idx[k]].query;
            ObjectGrids &g = grids_[q.object_id];
            const std::array<double, 2> p{q.p_prime.u, q.p_prime.v}, d{q.d_prime.u, q.d_prime.v};
            const float *row = dx.data() + k * in_dim;
            g.outer_pos.accumulate_grad(p, std::span<const float>(row, n));
            g.outer_dir.accumulate_grad(d, std::span<const float>(row + n, n));
            touched[q.object_id] = 1;
        }
        net.adam_step();
        for (size_t o = 0; o < object_count_; ++o)
            if (touched[o]) {
                grids_[o].outer_pos.adam_step_sparse();
                grids_[o].outer_dir.adam_step_sparse();
            }
        return loss.loss;
    }

    double train_inner_batch(const std::vector<InnerSample> &samples, const std::vector<uint32_t> &idx) {
        const int in_dim = config_.inner_input_dim(), n = config_.inner.pos_dir_grid_N, nd = config_.inner.dist_grid_N;
        std::vector<float> x(idx.size() * in_dim);
        for (size_t k = 0; k < idx.size(); ++k)
            encode_inner(samples[idx[k]].query, std::span<float>(x.data() + k * in_dim, in_dim));
        Mlp<float> &net = inner_net(samples[idx[0]].query.object_id);
        std::span<const float> pred = net.forward(x, idx.size());
        std::vector<float> target = batch_targets(samples, idx);
        LossResult<float> loss = l2_loss<float>(pred, target);
        std::vector<float> dx = net.backward(loss.grad);
        std::vector<uint8_t> touched(object_count_, 0);
        for (size_t k = 0; k < idx.size(); ++k) {
            const InnerQuery &q = samples[idx[k]].query;
            ObjectGrids &g = grids_[q.object_id];
            const std::array<double, 2> p{q.p_prime.u, q.p_prime.v}, d{q.d_prime.u, q.d_prime.v};
            const std::array<double, 1> r{q.r_prime};
            const float *row = dx.data() + k * in_dim;
            g.inner_pos.accumulate_grad(p, std::span<const float>(row, n));
            g.inner_dir.accumulate_grad(d, std::span<const float>(row + n, n));
            g.inner_dist.accumulate_grad(r, std::span<const float>(row + 2 * n, nd));
            touched[q.object_id] = 1;
        }
        net.adam_step();
        for (size_t o = 0; o < object_count_; ++o)
            if (touched[o]) {
                grids_[o].inner_pos.adam_step_sparse();
                grids_[o].inner_dir.adam_step_sparse();
                grids_[o].inner_dist.adam_step_sparse();
            }
        return loss.loss;
    }

    NifConfig config_;
    size_t object_count_ = 0;
    uint64_t seed_ = 0;
    double scene_diagonal_ = 1.0;
    bool trained_ = false;
    std::vector<ObjectGrids> grids_;
    std::vector<Mlp<float>> outer_, inner_;
};

}  // namespace nif
