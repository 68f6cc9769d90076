// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Trainable latent-vector grids with cell-centered linear interpolation.
//
// A query coordinate c in [0, 1] along an axis of resolution R maps to the
// continuous index x = c * R - 0.5; the two neighbouring cells floor(x) and
// floor(x) + 1 are blended with weights (1 - f, f), f = x - floor(x). Wrapped
// axes take indices modulo R, clamped axes clamp them to [0, R - 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nif/adam.hpp"
#include "nif/error.hpp"

namespace nif {

template <typename T, int Dims>
class FeatureGrid {
    static_assert(Dims == 1 || Dims == 2, "feature grids are 1D or 2D");

  public:
    static constexpr int kDims = Dims;
    static constexpr int kCorners = 1 << Dims;

    /// Cells and weights touched by one query. Weights sum to one.
    struct Footprint {
        std::array<uint32_t, kCorners> cells;
        std::array<T, kCorners> weights;
    };

    FeatureGrid() = default;

    /// Latents drawn i.i.d. from U(-1e-4, 1e-4); moments and gradients zero.
    FeatureGrid(int resolution, int latent_dim, bool wrap_u, uint64_t seed)
        : resolution_(resolution), latent_dim_(latent_dim), wrap_u_(wrap_u) {
        if (resolution < 1 || latent_dim < 1) throw Error("feature grid: resolution and latent dim must be >= 1");
        const size_t n = cell_count() * size_t(latent_dim);
        latents_.resize(n);
        grad_.assign(n, T(0));
        adam_m_.assign(n, T(0));
        adam_v_.assign(n, T(0));
        touched_flag_.assign(cell_count(), 0);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> dist(-1e-4, 1e-4);
        for (T &x : latents_) x = T(dist(rng));
    }

    int resolution() const { return resolution_; }
    int latent_dim() const { return latent_dim_; }
    bool wrap_u() const { return wrap_u_; }
    size_t cell_count() const { return Dims == 1 ? size_t(resolution_) : size_t(resolution_) * resolution_; }
    size_t scalar_count() const { return latents_.size(); }

    std::span<T> latents() { return latents_; }
    std::span<const T> latents() const { return latents_; }
    std::span<T> grad() { return grad_; }
    std::span<const T> grad() const { return grad_; }
    std::span<const T> adam_m() const { return adam_m_; }
    std::span<const T> adam_v() const { return adam_v_; }
    AdamParams &adam() { return adam_; }
    const AdamParams &adam() const { return adam_; }

    std::span<T> cell(uint32_t c) { return {latents_.data() + size_t(c) * latent_dim_, size_t(latent_dim_)}; }
    std::span<const T> cell(uint32_t c) const {
        return {latents_.data() + size_t(c) * latent_dim_, size_t(latent_dim_)};
    }

    /// Cell index of integer coordinates (iu along axis 0, iv along axis 1).
    uint32_t cell_index(int iu, int iv = 0) const { return uint32_t(Dims == 1 ? iu : iv * resolution_ + iu); }

    Footprint footprint(std::span<const double, Dims> coord) const {
        std::array<int, Dims> i0, i1;
        std::array<double, Dims> f;
        for (int a = 0; a < Dims; ++a) {
            double x = coord[a] * resolution_ - 0.5;
            double fl = std::floor(x);
            f[a] = x - fl;
            int lo = int(fl), hi = lo + 1;
            if (a == 0 && wrap_u_) {
                lo = ((lo % resolution_) + resolution_) % resolution_;
                hi = ((hi % resolution_) + resolution_) % resolution_;
            } else {
                if (lo < 0) f[a] = 0.0;
                if (hi > resolution_ - 1) f[a] = 0.0;
                lo = std::clamp(lo, 0, resolution_ - 1);
                hi = std::clamp(hi, 0, resolution_ - 1);
            }
            i0[a] = lo;
            i1[a] = hi;
        }
        Footprint fp;
        if constexpr (Dims == 1) {
            fp.cells = {cell_index(i0[0]), cell_index(i1[0])};
            fp.weights = {T(1.0 - f[0]), T(f[0])};
        } else {
            fp.cells = {cell_index(i0[0], i0[1]), cell_index(i1[0], i0[1]), cell_index(i0[0], i1[1]),
                        cell_index(i1[0], i1[1])};
            fp.weights = {T((1.0 - f[0]) * (1.0 - f[1])), T(f[0] * (1.0 - f[1])), T((1.0 - f[0]) * f[1]),
                          T(f[0] * f[1])};
        }
        return fp;
    }

    /// Interpolated latent vector written to `out` (latent_dim entries).
    void lookup(std::span<const double, Dims> coord, std::span<T> out) const {
        Footprint fp = footprint(coord);
        for (int k = 0; k < latent_dim_; ++k) out[k] = T(0);
        for (int c = 0; c < kCorners; ++c) {
            const T *src = latents_.data() + size_t(fp.cells[c]) * latent_dim_;
            const T w = fp.weights[c];
            for (int k = 0; k < latent_dim_; ++k) out[k] += w * src[k];
        }
    }

    std::vector<T> lookup(std::span<const double, Dims> coord) const {
        std::vector<T> out(latent_dim_);
        lookup(coord, out);
        return out;
    }

    /// Scatters `upstream` to the touched cells by interpolation weight.
    void accumulate_grad(std::span<const double, Dims> coord, std::span<const T> upstream) {
        Footprint fp = footprint(coord);
        for (int c = 0; c < kCorners; ++c) {
            const uint32_t cell = fp.cells[c];
            T *dst = grad_.data() + size_t(cell) * latent_dim_;
            const T w = fp.weights[c];
            for (int k = 0; k < latent_dim_; ++k) dst[k] += w * upstream[k];
            if (!touched_flag_[cell]) {
                touched_flag_[cell] = 1;
                touched_.push_back(cell);
            }
        }
    }

    void zero_grad() {
        std::fill(grad_.begin(), grad_.end(), T(0));
        clear_touched();
    }

    /// Dense bias-corrected Adam step over every scalar; gradients are zeroed.
    void adam_step(AdamParams &params) {
        const AdamStepScale scale(params);
        for (size_t i = 0; i < latents_.size(); ++i) adam_update(latents_[i], grad_[i], adam_m_[i], adam_v_[i], params, scale);
        clear_touched();
        ++params.step_count;
    }
    void adam_step() { adam_step(adam_); }

    /// Adam step restricted to cells touched since the last step. Untouched
    /// cells keep their values and moments.
    void adam_step_sparse(AdamParams &params) {
        const AdamStepScale scale(params);
        for (uint32_t cell : touched_) {
            const size_t base = size_t(cell) * latent_dim_;
            for (int k = 0; k < latent_dim_; ++k)
                adam_update(latents_[base + k], grad_[base + k], adam_m_[base + k], adam_v_[base + k], params, scale);
        }
        clear_touched();
        ++params.step_count;
    }
    void adam_step_sparse() { adam_step_sparse(adam_); }

    size_t touched_count() const { return touched_.size(); }

    /// Bytes actually allocated for latents, gradients and both moments.
    size_t allocated_bytes() const { return 4 * latents_.size() * sizeof(T); }

  private:
    void clear_touched() {
        for (uint32_t c : touched_) touched_flag_[c] = 0;
        touched_.clear();
    }

    int resolution_ = 0;
    int latent_dim_ = 0;
    bool wrap_u_ = false;
    std::vector<T> latents_, grad_, adam_m_, adam_v_;
    std::vector<uint32_t> touched_;
    std::vector<uint8_t> touched_flag_;
    AdamParams adam_;
};

template <typename T>
using FeatureGrid1D = FeatureGrid<T, 1>;
template <typename T>
using FeatureGrid2D = FeatureGrid<T, 2>;

// Memory accounting with half-precision latents (2 bytes) and 32-bit
// gradients and Adam moments (4 + 4 + 4 bytes) per cell.
inline constexpr uint64_t kTrainingBytesPerCell = 14;
inline constexpr uint64_t kRuntimeBytesPerCell = 2;

/// Footprint of one grid of the given dimensionality (1 or 2).
inline constexpr uint64_t grid_bytes(uint64_t resolution, int dims, bool training) {
    uint64_t cells = dims == 1 ? resolution : resolution * resolution;
    return cells * (training ? kTrainingBytesPerCell : kRuntimeBytesPerCell);
}

/// Position + direction 2D grids of the outer network: 28R^2 training, 4R^2 runtime.
inline constexpr uint64_t outer_grid_set_bytes(uint64_t resolution, bool training) {
    return 2 * grid_bytes(resolution, 2, training);
}

/// Position + direction 2D grids plus the 1D distance grid of the inner network:
/// 28R^2 + 14R training, 4R^2 + 2R runtime.
inline constexpr uint64_t inner_grid_set_bytes(uint64_t resolution, bool training) {
    return 2 * grid_bytes(resolution, 2, training) + grid_bytes(resolution, 1, training);
}

/// Interpolated lookup in a 2D grid at a spherical coordinate.
template <typename T>
std::vector<T> lookup_2d(const FeatureGrid2D<T> &grid, double u, double v) {
    const std::array<double, 2> c{u, v};
    return grid.lookup(c);
}

template <typename T>
std::vector<T> lookup_1d(const FeatureGrid1D<T> &grid, double r) {
    const std::array<double, 1> c{r};
    return grid.lookup(c);
}

/// Whole kibibytes, rounded up.
inline constexpr uint64_t to_kib_ceil(uint64_t bytes) { return (bytes + 1023) / 1024; }

}  // namespace nif
